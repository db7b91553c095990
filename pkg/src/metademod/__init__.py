"""Few-pilot neural demodulation over simulated IoT channels.

Simulates end-to-end device channels (fading, amplifier compression, AWGN),
meta-trains a small softmax-MLP demodulator so it adapts to a new device from
a handful of pilots, and benchmarks it against joint training, a fixed
initialization, and ideal references.
"""

from .channel import (Constellation, Dataset, DeviceChannel, MetaDataset,
                      ScenarioConfig, apply_nonlinearity, build_meta_dataset,
                      build_target_dataset, make_constellation, pilot_sequence,
                      realistic_scenario, sample_device, toy_scenario, transmit)
from .demodnet import (InitSpec, NetArch, NetParams, demodulate, flatten, forward,
                       hvp, init_params, loss, loss_grad, unflatten)
from .evaluate import (GridSpec, SerEstimate, decision_grid, estimate_ser,
                       ideal_ser_realistic, ideal_ser_toy, ml_oracle_ser,
                       origin_symmetry_diagnostic)
from .experiment import (ExperimentConfig, JointConfig, NetConfig, ResultRow,
                         dump_grid, load_checkpoint, load_config, run_experiment,
                         save_checkpoint)
from .metalearn import (MetaConfig, inner_adapt, joint_train, maml_meta_iteration,
                        maml_train, sgd_step, target_adapt)
from .numerics import q_function, rng_stream, sample_cgaussian

__version__ = "0.1.0"
