from .base import Environment, apply_overrides, load_env_config
from .train import TrainConfig, TrainEnv, make_sisyphean_train, make_versatile_train
from .river import RiverConfig, RiverEnv, make_crossing_river
from .acas import AcasConfig, AcasEnv, make_acas

#: env name -> (factory(overrides) -> Environment, spec file stem,
#:              default budget, default mode)
REGISTRY = {
    "sisyphean": (make_sisyphean_train, "sisyphean", 1e-3, "fixed"),
    "versatile": (lambda ov=None: make_versatile_train(ov, "k_sigma_large"),
                  "train_local", 1e-7, "meta"),
    "versatile-small": (lambda ov=None: make_versatile_train(ov, "k_sigma_small"),
                        "train_local", 1e-7, "meta"),
    "river": (make_crossing_river, "river", 1e-7, "meta"),
    "acas": (make_acas, "acas", 1e-7, "meta"),
}
