"""Module that contains global static constants."""

import math

# Largest group that is fully enumerated (8!).
group_enumeration_cap = 40_320

# Largest number of (cube, coset) tests a lattice count may perform.
cube_test_budget = 50_000_000

# Cubes tested per vectorized chunk.
cube_chunk_size = 200_000

# Uniform draws per Monte-Carlo block; every block owns its own RNG stream.
monte_carlo_block_size = 100_000

# Adam hyperparameters.
adam_learning_rate = 0.001
adam_beta1 = 0.9
adam_beta2 = 0.999
adam_epsilon = 1e-8

# Dudley integral resolution.
dudley_alpha_points = 256
dudley_quadrature_nodes = 1024
dudley_alpha_floor = 1e-6

# Dense export guard for ReLU networks (number of matrix entries).
dense_export_limit = 5_000_000

# Rows evaluated at once by a ReLU network.
relu_eval_chunk = 64

# Fixed float formatting for every emitted CSV.
csv_float_format = "%.17g"

# Emitted CSV headers.
gaps_columns = ["n", "seed", "train_mse", "test_mse", "gap", "log10_gap"]
summary_columns = ["n", "mean_log10_gap", "std_log10_gap", "theory_log10"]
curves_columns = [
    "n",
    "m",
    "group_order",
    "stab_order",
    "main_log10",
    "conf_log10",
    "total_log10",
    "ordinary_log10",
]
loss_columns = ["epoch", "train_mse"]

# Synthetic sum-regression defaults.
experiment_total_dim = 48
experiment_n_list = (2, 4, 6, 8)
experiment_m_train = 60
experiment_m_test = 10_000
experiment_epochs = 500
experiment_batch = 4
experiment_seeds = (1, 2, 3, 4, 5)
experiment_equivariant_widths = (128, 64, 32)
experiment_head_widths = (32,)

# Curve presets: invariant bound against m.
curve_n_list = (8, 10, 15)
curve_m_range = (10, 1_000_000)
log_curve_n_list = (8, 10, 15, 20)
log_curve_m_range = (10, 200_000)
curve_points = 60

LN10 = math.log(10.0)

# Samples per forward pass when a whole dataset is scored.
evaluation_chunk = 2048
