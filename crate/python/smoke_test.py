"""Smoke test for the compiled `idlesched` extension module."""

import math

import idlesched as s


def main():
    inst = s.Instance([(0, 20, 10), (15, 40, 15), (45, 70, 5), (80, 100, 10)])
    starts, energy = s.solve(inst, s.EnergyFunction.identity())
    assert energy == 40.0, energy
    assert starts == [10.0, 20.0, 45.0, 80.0], starts
    assert len(s.energy_graph(inst, s.EnergyFunction.identity()).splitlines()) == 18

    model = s.FurnaceModel()
    assert abs(model.trim_power(960.0) - 40.22) < 0.01
    assert abs(model.trim_power(600.0) - 17.72) < 0.01
    rows = model.simulate(300.0, 10.0)
    assert abs(rows[-1][1] - 960.0) < 1e-6

    table = model.tabulate(200.0, 1.0)
    _, e_table = s.solve(inst, table)
    assert math.isclose(e_table, table(10.0) + table(30.0))

    g = s.TransitionGraph.derive(model, [600.0, 700.0])
    _, e_dp = s.dp_solve(inst, g)
    assert e_table <= e_dp + 1e-9

    try:
        s.solve(s.Instance([(0, 100, 50), (0, 30, 10)]), s.EnergyFunction.identity())
    except s.SchedulingError:
        pass
    else:
        raise AssertionError("infeasible order accepted")

    big = s.generate_instance(30, 1.0, 1.0, seed=3)
    assert len(big) == 30
    print("smoke test ok:", energy, round(e_table, 3), round(e_dp, 3))


if __name__ == "__main__":
    main()
