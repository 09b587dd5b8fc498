"""Optional matplotlib helpers shared by the demos (skipped when absent)."""
from pathlib import Path

OUT = Path(__file__).resolve().parent / "output"


def figure(name, draw):
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print(f"(matplotlib not installed, skipping {name})")
        return None
    OUT.mkdir(exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    draw(ax)
    fig.tight_layout()
    path = OUT / name
    fig.savefig(path, dpi=130)
    plt.close(fig)
    print(f"wrote {path}")
    return path
