"""Character-level spelling correction with an attention encoder-decoder."""

from .corruptor import ConfusionTable, NoiseConfig, SentencePair
from .pipeline import ModelCheckpoint, TrainConfig, greedy_decode, load_checkpoint, save_checkpoint, train
from .seq2seq import ModelConfig
from .textcodec import Vocab, build_vocab

__version__ = "0.1.0"
