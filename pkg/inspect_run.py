# inspect_run.py
"""
检查一次求解器运行的输出目录 (run.json + CSV)
"""

import sys
from pathlib import Path

import numpy as np

from zrsolver.utils import read_json


def load_table(path):
    """读取带表头的CSV"""
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def show_run_summary(run):
    print("=" * 80)
    print(f"运行概览: {run.get('command', '?')}")
    print("=" * 80)

    config = run.get("config", {})
    print("\n【1. 配置】")
    print(f"  格式: {config.get('scheme')}  N = {config.get('N')}  h = {config.get('h')}")
    print(f"  tau = {config.get('tau')}  T = {config.get('T')}")
    if config.get("case"):
        print(f"  碰撞算例: {config['case']}")

    oracle = run.get("oracle", {})
    print("\n【2. 精确解】")
    print(f"  符号约定: {oracle.get('convention')}  已验证: {oracle.get('validated')}")
    print(f"  参考类型: {oracle.get('kind')}")

    iterations = run.get("iterations")
    if iterations:
        print("\n【3. 不动点迭代】")
        print(f"  步数: {iterations['steps']}")
        print(f"  平均迭代次数: {iterations['mean_iterations']:.2f}")
        print(f"  最大迭代次数: {iterations['max_iterations']}")
        print(f"  未收敛步数: {iterations['nonconverged_steps']}")

    drift = run.get("drift")
    if drift:
        print("\n【4. 守恒量漂移】")
        for name, values in drift.items():
            if name == "qav_residual":
                print(f"  {name:<12} max = {values['max']:.3e}")
            else:
                print(f"  {name:<12} 初值 = {values['initial']:+.10e}  rel = {values['rel']:.3e}")

    errors = run.get("final_errors")
    if errors:
        print("\n【5. 终止时刻误差】")
        for name, value in errors.items():
            print(f"  {name}: {value:.3e}")

    if "collision_discrepancy" in run:
        print(f"\n  与自由叠加的相对偏差: {run['collision_discrepancy']:.3e}")

    if "wall_time_s" in run:
        print(f"\n  耗时: {run['wall_time_s']:.2f} s")


def show_invariants(path, num_rows=5):
    header, data = load_table(path)
    print("\n" + "=" * 80)
    print(f"守恒量记录 ({data.shape[0]} 行)")
    print("=" * 80)
    t = data[:, header.index("t")]
    print(f"  时间范围: {t[0]:.4g} → {t[-1]:.4g}")
    for name in ("mass", "energyQ", "hamiltonian"):
        col = data[:, header.index(f"rel_drift_{name}")]
        worst = int(np.argmax(col))
        print(f"  {name:<12} 最大相对漂移 {col[worst]:.3e} (t = {t[worst]:.4g})")

    print("\n  前几行:")
    for row in data[:num_rows]:
        print("   " + ", ".join(f"{v:.6e}" for v in row[:7]))


def show_snapshots(path):
    header, data = load_table(path)
    times = np.unique(data[:, header.index("t")])
    abs_B = data[:, header.index("abs_B")]
    x = data[:, header.index("x")]
    print("\n" + "=" * 80)
    print(f"快照 ({len(times)} 个时刻)")
    print("=" * 80)
    for t in times:
        mask = data[:, 0] == t
        peak = int(np.argmax(abs_B[mask]))
        print(f"  t = {t:<10.4g} max|B| = {abs_B[mask][peak]:.6f}  位置 x = {x[mask][peak]:+.4f}")


def main(out_dir):
    out = Path(out_dir)
    run_path = out / "run.json"
    if not run_path.exists():
        error_path = out / "error.json"
        if error_path.exists():
            record = read_json(str(error_path))
            print(f"❌ {record['command']} 失败: {record['error']}: {record['message']}")
            return 1
        print(f"❌ 找不到 {run_path}")
        return 1

    show_run_summary(read_json(str(run_path)))
    if (out / "invariants.csv").exists():
        show_invariants(out / "invariants.csv")
    if (out / "snapshots.csv").exists():
        show_snapshots(out / "snapshots.csv")

    print("\n" + "=" * 80)
    print("✓ 检查完成")
    print("=" * 80)
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1] if len(sys.argv) > 1 else "out"))
