import pytest
from deepdiff import DeepDiff
from pyfakefs.fake_filesystem_unittest import TestCase

from logomr.common import ConfigError
from logomr.config import RunConfig, load_run_config, parse_run_config
from logomr.model import AggregationMode
from logomr.volume import ALL_PLANES, Plane


def test_defaults():
    config = parse_run_config("")

    assert config == RunConfig()
    assert config.dims == (64, 48, 40)
    assert config.n == 5 and config.gap == 5
    assert config.mode is AggregationMode.LOGO
    assert config.planes == (Plane.AXIAL,)
    assert config.lr == 5e-5 and config.patience == 10 and config.epochs == 100


def test_parse_values_lists_and_comments():
    text = """
    # training
    lr = 1e-3   # faster
    channels = 4, 8 , 16
    planes = all
    mode = no_pe
    augment = false
    split = 0.6, 0.2, 0.2
    """

    config = parse_run_config(text)

    assert config.lr == 1e-3
    assert config.channels == (4, 8, 16)
    assert config.planes == ALL_PLANES
    assert config.mode is AggregationMode.NO_PE
    assert config.augment is False
    assert config.split == (0.6, 0.2, 0.2)


@pytest.mark.parametrize("text,fragment", [
    ("lerning_rate = 0.1", "lerning_rate"),
    ("lr = 0.1\nlr = 0.2", "duplicate config key 'lr'"),
    ("lr 0.1", ":1: expected 'key = value'"),
    ("gap = many", "gap"),
    ("planes = axial, oblique", "planes"),
])
def test_parse_errors(text, fragment):
    with pytest.raises(ConfigError) as e:
        parse_run_config(text, source="run.cfg")

    assert fragment in str(e.value)


def test_derived_configs():
    config = parse_run_config("channels = 4, 8\nheads = 2\nn = 3\ngap = 2\nflip_h = 0\nshift_w = 1\nexams = 20")

    train = config.to_train_config()
    assert train.aggregator.embedding_dim == 8
    assert train.horizons == 3
    assert train.gap == 2
    assert train.augmentation.flip_probs == (0.5, 0.0, 0.5)
    assert train.augmentation.max_shift == (2, 2, 1)

    cohort = config.to_cohort_config()
    assert cohort.exams == 20
    assert cohort.horizons == 3
    assert cohort.dims == config.dims


def test_invalid_combination_surfaces_as_config_error():
    config = parse_run_config("channels = 4, 8\nheads = 3")

    with pytest.raises(ConfigError):
        config.to_train_config()


def test_with_overrides_keeps_other_keys():
    config = parse_run_config("lr = 1e-3\nseed = 4")

    changed = config.with_overrides(mode="mean", gap=0)

    diff = DeepDiff(config.model_dump(), changed.model_dump())
    assert set(diff["values_changed"]) == {"root['mode']", "root['gap']"}
    with pytest.raises(ConfigError):
        config.with_overrides(batch="two")


class TestLoadRunConfig(TestCase):
    def setUp(self):
        self.setUpPyfakefs()

    def test_load_from_file(self):
        self.fs.create_file("/runs/tiny.cfg", contents="dims = 16, 16, 16\nepochs = 3\n")

        config = load_run_config("/runs/tiny.cfg")

        assert config.dims == (16, 16, 16)
        assert config.epochs == 3

    def test_error_names_the_file_and_line(self):
        self.fs.create_file("/runs/bad.cfg", contents="epochs = 3\nlerning_rate = 0.1\n")

        with pytest.raises(ConfigError) as e:
            load_run_config("/runs/bad.cfg")

        assert "/runs/bad.cfg:2" in str(e.value)

    def test_missing_file(self):
        with pytest.raises(OSError):
            load_run_config("/runs/none.cfg")

    def test_no_path_gives_defaults(self):
        assert load_run_config(None) == RunConfig()
