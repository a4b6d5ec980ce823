from .data import ExternalVectors, Vocab
from .decode import DecodeResult, EncoderStates, decode, encode, predict
from .estimator import PointerReorderer
from .gradcheck import grad_check, max_relative_error
from .model import ModelConfig, PointerNetwork, biaffine_score
from .train import NumericError, TrainConfig, train

__all__ = ["DecodeResult", "EncoderStates", "ExternalVectors", "ModelConfig", "NumericError",
           "PointerNetwork", "PointerReorderer", "TrainConfig", "Vocab", "biaffine_score",
           "decode", "encode", "grad_check", "max_relative_error", "predict", "train"]
