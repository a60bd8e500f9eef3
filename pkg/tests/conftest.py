from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mock_endpoint import MockEndpoint  # noqa: E402


LISTING_YAML = """\
task: mmlu
dataset_path: cais/mmlu
dataset_subset: all
test_split: test
fewshot_split: dev
fewshot_config:
  sampler: first_n
  filter_column: subject
  num_fewshot: 5
doc_to_text: "{{question.strip()}}\\nA. {{choices[0]}}\\nB. {{choices[1]}}\\nC. {{choices[2]}}\\nD. {{choices[3]}}\\nAnswer:"
doc_to_choice: ["A", "B", "C", "D"]
doc_to_target: answer
metadata:
  - version: "0.0.1"
"""


@pytest.fixture
def listing_yaml() -> str:
    return LISTING_YAML


@pytest.fixture
def mock_server():
    server = MockEndpoint()
    base_url = server.start()
    server.base_url = base_url
    yield server
    server.stop()
