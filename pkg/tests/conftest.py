from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"
GOLDEN = FIXTURES / "golden"
CORPUS_PATH = FIXTURES / "corpus_50.jsonl"

if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from voiceclone.config import AppConfig
from voiceclone.corpus import load_corpus
from voiceclone.playbook import parse_playbook


def load_json(path: Path):
    return json.loads(path.read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def fixture_corpus():
    corpus = load_corpus(CORPUS_PATH)
    assert not corpus.diagnostics, "fixture corpus must be clean"
    return corpus


@pytest.fixture(scope="session")
def golden_playbook():
    return parse_playbook((GOLDEN / "playbook.json").read_text(encoding="utf-8"))


@pytest.fixture()
def app_config():
    return AppConfig()


@pytest.fixture(scope="session")
def playbook_dir():
    """Directory containing the golden playbook under the id 'playbook'."""
    return GOLDEN
