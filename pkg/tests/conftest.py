import numpy as np
import pytest

from linkshare.synth import generate, preset


@pytest.fixture(scope="session")
def small_cfg():
    return preset("small", seed=3)


@pytest.fixture(scope="session")
def small_world(small_cfg):
    """A complete ~6k-share synthetic world, shared by the integration tests."""
    return generate(small_cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_ctx(small_world, small_cfg):
    """Stores for the small world, assembled the way the pipeline assembles them."""
    from dataclasses import replace

    from linkshare._index import DAY, derive_seed
    from linkshare.embeddings import TasteIndex, train_track_embeddings
    from linkshare.features import ExtractionContext

    space = train_track_embeddings(small_world.world.playlists,
                                   replace(small_cfg.embedding, seed=derive_seed(small_cfg.seed, "embedding")))
    window = (small_cfg.start_ts - small_cfg.taste_window_days * DAY, small_cfg.start_ts)
    taste = TasteIndex.from_playback(space, small_world.playback, window)
    return ExtractionContext(small_world.network, taste, small_world.playback, small_world.world.accounts,
                             small_cfg.start_ts)


@pytest.fixture(scope="session")
def small_dataset(small_world, small_ctx):
    from linkshare.features import build_dataset
    from linkshare.shares import filter_discovery_shares

    events = filter_discovery_shares(small_world.events, small_world.playback)
    return build_dataset(events, small_ctx)


ACCEPTANCE = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[number] = (ok, detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
