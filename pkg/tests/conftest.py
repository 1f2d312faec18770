import pytest

from azspell import pipeline
from azspell.corruptor import SentencePair
from azspell.seq2seq import ModelConfig

TOY_PAIRS = [
    SentencePair("effeytiv", "effektiv"),
    SentencePair("mubarizə", "mübarizə"),
    SentencePair("onye", "ölkə"),
    SentencePair("tutqub", "tutub"),
    SentencePair("eri", "yeri"),
    SentencePair("salsm", "salam"),
]


@pytest.fixture(scope="session")
def toy_pairs():
    return list(TOY_PAIRS)


@pytest.fixture(scope="session")
def overfit(toy_pairs):
    """A tiny model trained until it reproduces TOY_PAIRS."""
    result = pipeline.train(
        toy_pairs,
        pipeline.TrainConfig(batch_size=6, epochs=150, seed=0, learning_rate=0.02),
        ModelConfig(vocab_size=1, embed_dim=16, units=32, encoder_depth=1, max_len=12),
    )
    return result


@pytest.fixture(scope="session")
def overfit_path(overfit, tmp_path_factory):
    path = tmp_path_factory.mktemp("model") / "toy.azsc"
    pipeline.save_checkpoint(overfit.checkpoint, path)
    return path


_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion listed in the summary")


def pytest_itemcollected(item):
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        item.user_properties.append(("criterion", marker.args))


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    entry = _CRITERIA.setdefault(props["criterion"], {"ok": True, "detail": ""})
    if report.failed or (report.when == "call" and report.skipped):
        entry["ok"] = False
    if report.when == "call":
        entry["detail"] = props.get("detail", "")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), entry in sorted(_CRITERIA.items()):
        status = "PASS" if entry["ok"] else "FAIL"
        detail = f"  ({entry['detail']})" if entry["detail"] else ""
        terminalreporter.write_line(f"criterion {number} {title}: {status}{detail}")
