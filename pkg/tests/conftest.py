import pytest

from discoreorder.treebank import read_tree

RUNNING = "(S (VP 0=A 2=C) (NP 1=B) 3=D)"


@pytest.fixture
def running():
    """Four tokens, VP over {0, 2} crossing NP over {1}."""
    return read_tree(RUNNING, "discbracket")
