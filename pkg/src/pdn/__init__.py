"""Position-aware decay weighted network for aspect-term sentiment analysis."""

from .config import DecaySpec, TrainConfig, decay
from .data import Example, Vocab, parse_semeval_xml, parse_tsv, tokenize
from .estimator import LSTMClassifier, NBOWClassifier, PDNClassifier
from .model import LSTMBaseline, NBOW, PDN, encode_positions
from .training import evaluate, majority_baseline, train

__all__ = [
    "DecaySpec", "Example", "LSTMBaseline", "LSTMClassifier", "NBOW", "NBOWClassifier", "PDN",
    "PDNClassifier", "TrainConfig", "Vocab", "decay", "encode_positions", "evaluate",
    "majority_baseline", "parse_semeval_xml", "parse_tsv", "tokenize", "train",
]
