"""nopnet: a desk-scale lab pairing a mnemonic-sequence CNN malware-family
classifier with a Double-DQN agent that evades it by inserting NOPs."""

__version__ = "0.1.0"

from .classifier import ClassifierModel, evaluate, train_classifier
from .corpus import (MnemonicVocab, Sample, SyntheticConfig, build_insert_mask,
                     generate_synthetic_corpus, parse_asm, split_corpus)
from .env import EvasionEnv, EpisodeTrace, episode_return
from .agent import greedy_agent, random_agent, train_agent
from .qnet import QNetwork, double_q_target, polyak_update, q_values, select_action
from .replay import EpsilonSchedule, ReplayBuffer, Transition
from .tensor import Param, ParamSet, load_checkpoint, save_checkpoint

__all__ = [
    "ClassifierModel", "evaluate", "train_classifier",
    "MnemonicVocab", "Sample", "SyntheticConfig", "build_insert_mask",
    "generate_synthetic_corpus", "parse_asm", "split_corpus",
    "EvasionEnv", "EpisodeTrace", "episode_return",
    "greedy_agent", "random_agent", "train_agent",
    "QNetwork", "double_q_target", "polyak_update", "q_values", "select_action",
    "EpsilonSchedule", "ReplayBuffer", "Transition",
    "Param", "ParamSet", "load_checkpoint", "save_checkpoint",
    "__version__",
]
