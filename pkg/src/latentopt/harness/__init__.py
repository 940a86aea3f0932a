from .config import ConfigError, ExperimentConfig, load_config
from .experiments import Workspace, day_problem, run_noise_sweep, run_scaling, run_suite, scaled_latent_dims
from .prices import PriceColumnError, PriceCoverageError, PriceError, PriceSeries, ingest_prices
