# backend/litehetnet/plot_templates.py

from backend.litehetnet.hetnet_enums import FigureKind


def fig2a_script(csv_name: str) -> str:
    return f'''"""覆盖概率 vs IN 阈值（T1 = T2）"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

HERE = os.path.dirname(os.path.abspath(__file__))

data = pd.read_csv(os.path.join(HERE, "{csv_name}"))
fig, ax = plt.subplots(figsize=(5.0, 3.6))
ax.plot(data["threshold"], data["s_analytical"], "b-o", label="Analytical")
if "s_mc" in data:
    ax.errorbar(data["threshold"], data["s_mc"], yerr=data["ci95"], fmt="rs", mfc="none", label="Monte Carlo")
ax.plot(data["threshold"], data["s_non_in"], "k--", label="non-IN")
ax.set_xscale("log")
ax.set_xlabel("IN threshold $T_1 = T_2$")
ax.set_ylabel("Coverage probability")
ax.grid(True, linestyle=":")
ax.legend(loc="best")
fig.tight_layout()
fig.savefig(os.path.join(HERE, "fig2a.pdf"))
'''


def fig2b_script(csv_name: str) -> str:
    return f'''"""小 β 下的中断概率与渐近直线（对数坐标）"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

HERE = os.path.dirname(os.path.abspath(__file__))

data = pd.read_csv(os.path.join(HERE, "{csv_name}"))
fig, ax = plt.subplots(figsize=(5.0, 3.6))
for (u, t1, t2), group in data.groupby(["u", "t1", "t2"], sort=False):
    label = f"U={{u}}, T1={{t1:g}}, T2={{t2:g}}"
    line, = ax.semilogy(group["beta_db"], group["outage_analytical"], "-o", ms=3, label=label)
    ax.semilogy(group["beta_db"], group["outage_asymptotic"], "--", color=line.get_color())
ax.set_xlabel("SIR threshold $\\\\beta$ (dB)")
ax.set_ylabel("Outage probability")
ax.grid(True, which="both", linestyle=":")
ax.legend(loc="best", fontsize=7)
fig.tight_layout()
fig.savefig(os.path.join(HERE, "fig2b.pdf"))
'''


def get_plot_script(figure: FigureKind, csv_name: str) -> str:
    if figure == FigureKind.Fig2a:
        return fig2a_script(csv_name)
    return fig2b_script(csv_name)
