"""Figure rendering: files are produced and non-trivial for each report type."""

from quboforge import plots

PNG_MAGIC = b"\x89PNG"


def test_plot_convergence(tmp_path):
    history = [
        (0, None, 200.0, 200.0, None, 120.0, "optimality", None, 0.1),
        (1, 90.0, None, 200.0, 90.0, None, "feasibility", 12, 0.2),
        (2, 150.0, 180.0, 180.0, 150.0, 100.0, "optimality", 14, 0.3),
    ]
    path = tmp_path / "conv.png"
    plots.plot_convergence(history, path)
    assert path.read_bytes()[:4] == PNG_MAGIC


def test_plot_sa_trace(tmp_path):
    trace = [(s, 100.0 - s, 100.0 - s / 2, 10.0 * 0.9**s) for s in range(30)]
    path = tmp_path / "trace.png"
    plots.plot_sa_trace(trace, path)
    assert path.read_bytes()[:4] == PNG_MAGIC


def test_plot_bench(tmp_path):
    from quboforge.bench import BenchReport

    reports = [
        BenchReport(instance="a", method="direct-oracle", objective=10.0,
                    oracle=10.0, gap=0.0, wall_s=0.1),
        BenchReport(instance="a", method="monolithic-qubo", objective=14.0,
                    oracle=10.0, gap=0.4, wall_s=0.5),
        BenchReport(instance="a", method="hybrid-benders", objective=10.0,
                    oracle=10.0, gap=0.0, wall_s=0.3),
    ]
    path = tmp_path / "bench.png"
    plots.plot_bench(reports, path)
    assert path.read_bytes()[:4] == PNG_MAGIC
