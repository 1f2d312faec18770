"""End-to-end acceptance checks, one test per criterion.

Run with ``pytest tests/test_acceptance.py``; the terminal summary lists
one PASS/FAIL line per criterion together with the measured values.
"""

import itertools
import time
from collections import Counter

import numpy as np
import pytest

from azspell import cli, corruptor, evaluation, numerics, pipeline, seq2seq
from azspell.corruptor import NoiseConfig, SentencePair
from azspell.editdist import damerau_levenshtein, levenshtein
from azspell.numerics import Tensor
from azspell.seq2seq import ModelConfig

from oracles import lev_rec, osa_rec
from test_seq2seq import model_gradient_error, random_batch

WORDS = (
    "salam dünya kitab məktəb şəhər çörək ağac göz üzüm qələm dəniz ulduz günəş bulud yağış qar "
    "külək daş torpaq su od hava ev qapı pəncərə masa stul yataq divar bağ gül ot meyvə alma armud "
    "nar heyva gilas tut limon portağal balıq quş at it pişik inək qoyun keçi toyuq"
).split()


def strings_up_to(alphabet, n):
    for k in range(n + 1):
        for chars in itertools.product(alphabet, repeat=k):
            yield "".join(chars)


@pytest.mark.criterion(1, "parameter count")
def test_parameter_count(record_property):
    start = time.perf_counter()
    config = ModelConfig(vocab_size=99, embed_dim=500, units=500, encoder_depth=3)
    params = seq2seq.init_params(config, seed=0)
    total = sum(p.size for p in params.values())
    counts = seq2seq.layer_param_counts(config)
    elapsed = time.perf_counter() - start
    record_property("detail", f"total {total:,}, {elapsed:.2f}s")
    assert total == seq2seq.count_params(config) == 8_706_599
    assert counts["encoder/embedding"] == counts["decoder/embedding"] == 49_500
    assert all(counts[k] == 2_002_000 for k in counts if "lstm" in k)
    assert sum("lstm" in k for k in counts) == 4
    assert counts["attention"] == 500_500
    assert counts["output"] == 99_099
    assert elapsed < 1.0


@pytest.mark.criterion(2, "gradient check")
def test_gradient_check(record_property):
    start = time.perf_counter()
    config = ModelConfig(vocab_size=12, embed_dim=8, units=8, encoder_depth=1, max_len=6)
    params = seq2seq.init_params(config, seed=11)
    # larger weights than the default init make the check less forgiving
    params = {k: Tensor(v.data * 5) for k, v in params.items()}
    x, y = random_batch(config, 2, seed=1), random_batch(config, 2, seed=2)
    worst = model_gradient_error(config, params, x, y, step=1e-4)
    elapsed = time.perf_counter() - start
    name = max(worst, key=worst.get)
    record_property("detail", f"max rel err {worst[name]:.2e} at {name}, {len(worst)} tensors, {elapsed:.1f}s")
    assert len(worst) == len(seq2seq.param_shapes(config))
    assert worst[name] < 1e-4
    assert elapsed < 120


@pytest.mark.criterion(3, "attention normalization")
def test_attention_normalization(record_property):
    config = ModelConfig(vocab_size=15, embed_dim=6, units=7, encoder_depth=2, max_len=10)
    params = seq2seq.init_params(config, seed=4)
    params = {k: Tensor(v.data * 20) for k, v in params.items()}
    rng = np.random.default_rng(9)
    steps, worst = 0, 0.0
    while steps < 1000:
        x = random_batch(config, 10, seed=int(rng.integers(1 << 30)))
        mask = x != 0
        enc, h, c = seq2seq.encode(x, params, config)
        y_prev = np.full(len(x), 1)
        for _ in range(config.max_len - 1):
            logits, h, c, w = seq2seq.decoder_step(y_prev, h, c, enc, mask, params)
            weights = w.data if isinstance(w, Tensor) else np.asarray(w)
            worst = max(worst, float(np.abs(weights.sum(axis=1) - 1).max()))
            assert np.all(weights[~mask] == 0.0)
            y_prev = rng.integers(1, config.vocab_size, size=len(x))
            steps += len(x)
    record_property("detail", f"{steps} rows, max |sum-1| {worst:.1e}")
    assert worst <= 1e-9


@pytest.mark.criterion(4, "edit distance oracle")
def test_edit_distance_oracle(record_property):
    start = time.perf_counter()
    pool = list(strings_up_to("abc", 5))
    mismatches = 0
    for a in pool:
        for b in pool:
            mismatches += levenshtein(a, b) != lev_rec(a, b)
            mismatches += damerau_levenshtein(a, b) != osa_rec(a, b)
    elapsed = time.perf_counter() - start
    record_property("detail", f"{len(pool) ** 2:,} pairs, {mismatches} mismatches, {elapsed:.1f}s")
    assert len(pool) == 364
    assert mismatches == 0
    assert elapsed < 60


@pytest.mark.criterion(5, "corruption statistics")
def test_corruption_statistics(record_property):
    table = corruptor.load_confusion_table()
    config = NoiseConfig(seed=2024)
    rng = corruptor.make_rng(config.seed)
    alphabet = corruptor.alphabet_of(WORDS)
    stats = Counter()
    for k in range(100_000):
        corruptor.corrupt_word(WORDS[k % len(WORDS)], table, config, rng, alphabet, stats)
    applied = sum(stats[o] for o in corruptor.OPERATIONS)
    fraction = stats["corrupted"] / stats["words"]
    share = stats["substitution"] / applied
    record_property("detail", f"corrupted {fraction:.4f}, substitution share {share:.4f}")
    assert stats["words"] == 100_000
    assert abs(fraction - 0.50) <= 0.01
    assert abs(share - 0.60) <= 0.02


def overfit_pairs():
    table = corruptor.load_confusion_table()
    pairs = corruptor.generate_pairs(WORDS[:50], 50, table, NoiseConfig(p_word=1.0, seed=3))
    assert all(len(p.wrong) <= 12 and len(p.correct) <= 12 for p in pairs)
    return pairs


@pytest.mark.criterion(6, "overfit")
@pytest.mark.slow
def test_overfit(record_property):
    start = time.perf_counter()
    pairs = overfit_pairs()
    first_below = []
    result = pipeline.train(
        pairs,
        pipeline.TrainConfig(batch_size=25, epochs=500, seed=0, learning_rate=0.01),
        ModelConfig(vocab_size=1, embed_dim=32, units=64, encoder_depth=1, max_len=16),
        on_epoch=lambda e, loss, _: first_below.append(e) if loss < 0.1 and not first_below else None,
    )
    preds = pipeline.greedy_decode_batch([p.wrong for p in pairs], result.checkpoint)
    exact = np.mean([p == pair.correct for p, pair in zip(preds, pairs)])
    elapsed = time.perf_counter() - start
    record_property("detail", f"final loss {result.losses[-1]:.4f}, loss < 0.1 from epoch "
                              f"{first_below[0] if first_below else '-'}, exact {exact:.2f}, {elapsed:.0f}s")
    assert result.losses[-1] < 0.1
    assert exact >= 0.9
    assert elapsed < 300


@pytest.mark.criterion(7, "desk-scale comparison")
@pytest.mark.slow
def test_desk_scale_comparison(record_property):
    table = corruptor.load_confusion_table()
    pairs = corruptor.generate_pairs(WORDS, 2000, table, NoiseConfig(seed=17))
    train_pairs, held = pipeline.split_holdout(pairs, 0.1, seed=17)
    assert len(held) == 200
    result = pipeline.train(
        train_pairs,
        pipeline.TrainConfig(batch_size=40, epochs=6, seed=0, learning_rate=0.01),
        ModelConfig(vocab_size=1, embed_dim=32, units=64, encoder_depth=1, max_len=16),
    )
    neural = evaluation.evaluate_model(result.checkpoint, held)
    dictionary = evaluation.Dictionary.from_words(p.correct for p in train_pairs)
    baseline = evaluation.evaluate_baseline(dictionary, held)
    clean = evaluation.evaluate_baseline(dictionary, [SentencePair(p.correct, p.correct) for p in held])

    def curve(report):
        return [report.accuracy_at[d] for d in range(4)]

    record_property("detail", "neural " + "/".join(f"{a:.2f}" for a in curve(neural))
                    + ", baseline " + "/".join(f"{a:.2f}" for a in curve(baseline))
                    + f", clean baseline d=0 {clean.accuracy_at[0]:.2f}")
    for report in (neural, baseline):
        assert curve(report) == sorted(curve(report))
    layout = [line.split("\t")[0] for line in neural.to_tsv(records=False).splitlines()]
    assert layout == [line.split("\t")[0] for line in baseline.to_tsv(records=False).splitlines()]
    assert neural.to_tsv().splitlines()[6] == baseline.to_tsv().splitlines()[6] == "input\tprediction\tgold\tdistance"
    assert clean.accuracy_at[0] == 1.0


@pytest.mark.criterion(8, "determinism")
def test_determinism(record_property, tmp_path):
    corpus = tmp_path / "corpus.txt"
    corpus.write_text("\n".join(" ".join(WORDS[k:k + 3]) for k in range(0, 30, 3)) + "\n", encoding="utf-8")
    digests = []
    for run in ("a", "b"):
        pairs, model = tmp_path / f"{run}.tsv", tmp_path / f"{run}.azsc"
        assert cli.main(["gen", "--corpus", str(corpus), "--count", "60", "--seed", "7", "--out", str(pairs)]) == 0
        assert cli.main(["train", "--pairs", str(pairs), "--epochs", "2", "--batch", "16", "--embed-dim", "8",
                         "--units", "12", "--encoder-depth", "2", "--max-len", "40", "--seed", "3",
                         "--out", str(model)]) == 0
        digests.append((pairs.read_bytes(), model.read_bytes()))
    record_property("detail", f"pairs {len(digests[0][0])} bytes, checkpoint {len(digests[0][1])} bytes")
    assert digests[0][0] == digests[1][0]
    assert digests[0][1] == digests[1][1]


@pytest.mark.criterion(9, "checkpoint round trip")
def test_checkpoint_round_trip(record_property, tmp_path):
    result = pipeline.train(overfit_pairs()[:8], pipeline.TrainConfig(batch_size=4, epochs=2),
                            ModelConfig(vocab_size=1, embed_dim=8, units=8, encoder_depth=2, max_len=16))
    first, second = tmp_path / "first.azsc", tmp_path / "second.azsc"
    pipeline.save_checkpoint(result.checkpoint, first)
    pipeline.save_checkpoint(pipeline.load_checkpoint(first), second)
    raw = first.read_bytes()
    assert raw == second.read_bytes()

    ck = result.checkpoint
    wrong_shape = dict(ck.params)
    wrong_shape["decoder/lstm/bias"] = Tensor(np.zeros(3))
    cases = {
        pipeline.BadMagicError: b"ZZZZ" + raw[4:],
        pipeline.VersionMismatchError: raw[:4] + b"\x07" + raw[5:],
        pipeline.TruncatedCheckpointError: raw[: len(raw) // 2],
        pipeline.ShapeMismatchError: pipeline.ModelCheckpoint(ck.config, ck.vocab, wrong_shape).to_bytes(),
    }
    for error, blob in cases.items():
        path = tmp_path / f"{error.__name__}.azsc"
        path.write_bytes(blob)
        with pytest.raises(error):
            pipeline.load_checkpoint(path)
    record_property("detail", f"{len(raw)} bytes, {len(cases)} corruption modes")
    assert numerics.DTYPE == np.float64
