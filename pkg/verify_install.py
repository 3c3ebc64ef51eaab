# verify_install.py
"""验证依赖安装并做一次最小的求解"""


def verify_installation():
    print("=" * 70)
    print("验证包安装")
    print("=" * 70)

    packages_to_test = [
        ("numpy", 'import numpy; print(f"  版本: {numpy.__version__}")'),
        ("scipy", 'import scipy; print(f"  版本: {scipy.__version__}"); import scipy.fft, scipy.integrate'),
        ("tqdm", 'import tqdm; print(f"  版本: {tqdm.__version__}")'),
        ("pytest", 'import pytest; print(f"  版本: {pytest.__version__}")'),
        ("zrsolver", 'from zrsolver import Simulation, RunConfig; print("  ✓ zrsolver可导入")'),
    ]

    failed = []

    for name, test_code in packages_to_test:
        print(f"\n测试 {name}:")
        try:
            exec(test_code)
            print(f"  ✓ {name} 正常")
        except Exception as e:
            print(f"  ❌ {name} 失败: {e}")
            failed.append(name)

    print("\n" + "=" * 70)
    if failed:
        print(f"❌ 失败的包: {', '.join(failed)}")
        print("\n修复建议:")
        print("  pip install -r requirements.txt")
        return False

    print("\n最小求解 (N = 64, 5 步):")
    try:
        from zrsolver import build_grid, build_stage_solver, initial_single, mass, Params, SolitonSpec

        params = Params(1.0, 1.0, 1.0, 7.0)
        grid = build_grid(-32.0, 32.0, 64)
        state0 = initial_single(params, SolitonSpec(x0=2.0), grid)
        solver = build_stage_solver(grid, params, "gauss2", 0.02)
        state, summary = solver.integrate(state0, 0.1)
        m0, m1 = mass(grid, state0), mass(grid, state)
        print(f"  质量相对漂移: {abs(m1 - m0) / m0:.3e}")
        print(f"  迭代统计: {summary.as_dict()}")
    except Exception as e:
        print(f"  ❌ 求解失败: {e}")
        return False

    print("\n✓ 所有包安装成功！")
    print("\n可以运行实验:")
    print("  python -m zrsolver selftest")
    print("  python -m zrsolver run --config configs/conservation_smoke.toml --out out/smoke")
    return True


if __name__ == "__main__":
    import sys

    print(f"使用的Python: {sys.executable}\n")
    sys.exit(0 if verify_installation() else 1)
