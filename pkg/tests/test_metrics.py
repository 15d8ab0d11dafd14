import pytest
from hypothesis import given
from hypothesis import strategies as st

from promptinspect.metrics import ConfusionMatrix, Metrics, compute_metrics


class TestComputeMetrics:
    def test_zero_shot_cable_baseline_matrix(self):
        # 58 good / 92 anomalous test images; printed row 97.1 / 73.9 / 84.0
        m = compute_metrics(ConfusionMatrix(tp=68, fp=2, fn=24, tn=56))
        assert m.precision * 100 == pytest.approx(97.1, abs=0.05)
        assert m.recall * 100 == pytest.approx(73.9, abs=0.05)
        assert m.f1 * 100 == pytest.approx(84.0, abs=0.05)

    def test_crimp_baseline_matrix(self):
        # 50 normal / 100 anomalous; printed row 100.0 / 76.0 / 86.4
        m = compute_metrics(ConfusionMatrix(tp=76, fp=0, fn=24, tn=50))
        assert m.precision == pytest.approx(1.0)
        assert m.recall == pytest.approx(0.76)
        assert m.f1 * 100 == pytest.approx(86.4, abs=0.05)

    def test_no_positives_anywhere_is_degenerate_zero(self):
        m = compute_metrics(ConfusionMatrix(tp=0, fp=0, fn=0, tn=10))
        assert (m.precision, m.recall, m.f1) == (0.0, 0.0, 0.0)
        assert m.degenerate

    def test_perfect(self):
        m = compute_metrics(ConfusionMatrix(tp=5, fp=0, fn=0, tn=5))
        assert (m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0)
        assert not m.degenerate

    @given(
        tp=st.integers(0, 200),
        fp=st.integers(0, 200),
        fn=st.integers(0, 200),
        tn=st.integers(0, 200),
    )
    def test_f1_between_precision_and_recall(self, tp, fp, fn, tn):
        m = compute_metrics(ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn))
        if not m.degenerate:
            assert min(m.precision, m.recall) - 1e-12 <= m.f1
            assert m.f1 <= max(m.precision, m.recall) + 1e-12


class TestConfusionMatrix:
    def test_counts_conserve(self):
        cm = ConfusionMatrix()
        for truth, predicted in [(1, 1), (0, 1), (1, 0), (0, 0), (1, None)]:
            cm = cm.add(truth, predicted)
        assert (cm.tp, cm.fp, cm.fn, cm.tn, cm.unparseable) == (1, 1, 1, 1, 1)
        assert cm.total == 5

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            ConfusionMatrix(tp=-1)

    def test_round_trip(self):
        cm = ConfusionMatrix(tp=3, fp=1, fn=2, tn=9, unparseable=1)
        assert ConfusionMatrix.from_dict(cm.to_dict()) == cm
        m = compute_metrics(cm)
        assert Metrics.from_dict(m.to_dict()) == m
