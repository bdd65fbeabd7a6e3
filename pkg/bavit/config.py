import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

CONFIG_PATH = os.path.expanduser("~/.config/bavit/config.toml")
ENV_PREFIX = "BAVIT"

# labeling
DEFAULT_IMAGE_SIZE = 384
DEFAULT_PATCH_SIZE = 16
DEFAULT_TAU = 0.5
DEFAULT_OVERLAP_MODE = "coverage"
DEFAULT_MIN_FRACTION = 0.10

# model
DEFAULT_EMBED_DIM = 192
DEFAULT_DEPTH = 2
DEFAULT_HEADS = 3
DEFAULT_MLP_RATIO = 4
NUM_CLASSES = 2
BG, FG = 0, 1
INIT_STD = 0.02
NORM_EPS = 1e-6

# training
DEFAULT_LR = 1e-3
DEFAULT_STEP_SIZE = 30
DEFAULT_GAMMA = 0.1
DEFAULT_BATCH_SIZE = 32
DEFAULT_EPOCHS = 100
DEFAULT_CLIP_NORM = 1.0
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8

# pixels are scaled to [0, 1] then normalized per channel
PIXEL_MEAN = 0.5
PIXEL_STD = 0.5

# post-processing
DEFAULT_CCA_THRESHOLD = 2
DEFAULT_CCA_STEPS = 3

# token accounting (layer-weighted, per image)
DETECTOR_TOKENS = 1024
DETECTOR_LAYERS = 12
BAVIT_TOKENS = 576
BAVIT_LAYERS = 2
REPORT_SPARSITIES = (0.46, 0.43, 0.40, 0.39, 0.37, 0.35, 0.32, 0.29, 0.05, 0.02, 0.0)


def load_config_file(path):
    """Read a TOML config into a click default_map ({subcommand: {param: value}})."""
    if not path or not os.path.isfile(path):
        return {}

    with open(path, "rb") as f:
        data = tomllib.load(f)

    default_map = {}
    for section, values in data.items():
        if not isinstance(values, dict):
            continue
        default_map[section] = {
            key.replace("-", "_"): value for key, value in values.items()
        }
    return default_map


def env_var_name(command_name, param_name):
    command = command_name.replace("-", "_").upper()
    return f"{ENV_PREFIX}_{command}_{param_name.upper()}"
