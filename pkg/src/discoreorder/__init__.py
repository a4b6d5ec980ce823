"""Discontinuous constituent parsing by token reordering."""
from .metrics import EvalConfig, Scores, bracket_scores, reorder_scores
from .reorder import (CCATransformer, Permutation, RelocationMask, cca_permutation, invert,
                      permute_sentence, permute_tree, relocated_mask, restore_discontinuous)
from .treebank import (ConstTree, Corpus, Sentence, Token, discontinuous_nodes, node_yield,
                       read_corpus, write_corpus)

__version__ = "0.1.0"

__all__ = ["CCATransformer", "ConstTree", "Corpus", "EvalConfig", "Permutation",
           "RelocationMask", "Scores", "Sentence", "Token", "bracket_scores", "cca_permutation",
           "discontinuous_nodes", "invert", "node_yield", "permute_sentence", "permute_tree",
           "read_corpus", "relocated_mask", "reorder_scores", "restore_discontinuous",
           "write_corpus"]
