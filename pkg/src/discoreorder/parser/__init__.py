from .bridge import bridge_read, bridge_write
from .cky import ParseResult, cky_parse
from .estimator import PCFGParser
from .grammar import Grammar, GrammarError, induce_grammar

__all__ = ["Grammar", "GrammarError", "PCFGParser", "ParseResult", "bridge_read",
           "bridge_write", "cky_parse", "induce_grammar"]
