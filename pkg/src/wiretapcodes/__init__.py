"""Short-blocklength codes for Gaussian wiretap channels with helpers.

The toolkit pairs a trained autoencoder reliability layer (with successive
interference cancellation at the receiver) with a universal-hash security
layer over GF(2^q), and measures the information leaked to an eavesdropper
with neural mutual-information estimators (a lower and an upper bound).
"""

from .channel import ChannelParams, noise_sample, transmit_eve, transmit_main
from .evaluation import (AchievabilityTuple, EvalReport, achievability_report,
                         estimate_error_rates, sweep, write_csv)
from .gf2 import GF2Field
from .leakage import (ESTIMATOR_PRESETS, ClubConfig, LeakageEstimate, MineConfig,
                      SampleSet, club_estimate, collect_samples, mine_estimate)
from .nn import MlpModel, TrainConfig, TrainingError
from .reliability import (CodeConfig, CodecPair, UserSpec, baseline_joint_decoding,
                          baseline_time_sharing, decode_sic, train, train_ptp,
                          train_sic)
from .rng import derive_rng, derive_seed
from .security import Seed, decode_secret, encode_secret, select_seed

__version__ = "0.1.0"
