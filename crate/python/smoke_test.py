"""Build the extension module, import it, and exercise the exported API.

Usage: python3 python/smoke_test.py
"""

import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def build(tmp: Path) -> Path:
    subprocess.run(
        ["cargo", "build", "-q", "-p", "plotsearch-py", "-p", "plotsearch-core"],
        cwd=ROOT,
        check=True,
    )
    target = ROOT / "target" / "debug"
    lib = next(p for p in (target / "libplotsearch.so", target / "libplotsearch.dylib") if p.exists())
    shutil.copy(lib, tmp / "plotsearch.so")
    sys.path.insert(0, str(tmp))
    return target / "plotsearch"


def main() -> None:
    with tempfile.TemporaryDirectory() as d:
        tmp = Path(d)
        cli = build(tmp)
        import plotsearch as ps

        assert abs(ps.interest(5.0) - 0.24935) < 1e-5
        assert ps.interest(4.0) == 1.0
        assert ps.curiosity_index([4.0, 4.0]) == 1.0
        assert math.isinf(ps.ucb_score(0.5, 10, 0, 1.414))
        assert abs(ps.pair_score(0.64, 0.10) - 0.37) < 1e-12
        assert abs(ps.cles(0.57) - 0.657) < 0.005

        stats = ps.effect_stats([7, 8, 6, 9, 7], [6, 6, 6, 7, 5])
        assert stats["n"] == 5 and stats["wilcoxon"]["n"] == 4

        groups = [
            (f"g{g}", [(k, 0.3 + 0.05 * g + 0.02 * math.log(k)) for k in range(1, 21)])
            for g in range(3)
        ]
        fit = ps.loglinear_fit(groups)
        assert abs(fit["slope"] - 0.02) < 1e-9

        tree, found = ps.oracle_search(seed=3)
        assert found and tree.replay_matches()
        again = ps.SearchTree.from_json(tree.to_json())
        assert len(again) == len(tree) and again.tree_id == tree.tree_id
        assert tree.to_dot().startswith("digraph")
        v_max, _, best, _ = tree.final_values()
        assert 0.0 <= v_max <= 1.0 and tree.story(best)

        config = tmp / "run.toml"
        config.write_text(
            "seed = 2\n[search]\nmax_iterations = 10\nfrontier_cap = 8\nucb_descents = 4\n"
            "[search.schedule]\nfirst = 8\nsecond = 3\nlater = 2\n"
            '[value]\nmodel = "model.json"\n'
        )
        for args in (
            ["gen-corpus", "--stories", "30", "--out", "corpus.jsonl"],
            ["train-value", "--corpus", "corpus.jsonl", "--out", "model.json"],
        ):
            subprocess.run(
                [str(cli), args[0], "--config", "run.toml", *args[1:]],
                cwd=tmp,
                check=True,
                capture_output=True,
            )
        tree, reports = ps.run_search(str(config), ["A kite that will not come down."])
        assert len(reports) == 10 and reports[0]["kappa"] == 8
        assert tree.replay_matches()
        pairs = tree.mine_pairs()
        assert all(p["q_chosen"] > 0.5 for p in pairs)
        assert tree.v_q_correlation() > 0.5

        try:
            ps.interest(1.0, spread=0.0)
        except ValueError:
            pass
        else:
            raise AssertionError("invalid spread accepted")

    print(f"python smoke test passed ({len(pairs)} preference pairs)")


if __name__ == "__main__":
    main()
