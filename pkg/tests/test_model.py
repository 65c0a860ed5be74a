import numpy as np
import pytest
import yaml

from minmaxlq.model import (
    ProblemFormatError,
    ProblemValidationError,
    dump_problem,
    load_problem,
    loads_problem,
    problem_from_dict,
    problem_to_dict,
    problems_equal,
    shipped_problem_path,
    shipped_problems,
    validate,
)


def _doc(name="ex1"):
    return yaml.safe_load(shipped_problem_path(name).read_text())


def _violations(doc):
    return validate(problem_from_dict(doc))


def test_example1_loads(ex1):
    assert len(ex1.plants) == 2
    assert (ex1.n, ex1.m, ex1.N) == (2, 1, 17)
    np.testing.assert_array_equal(ex1.x0, [3, -2])
    assert ex1.delta.times[-1] == 10.0


def test_example2_validates(ex2):
    assert validate(ex2) == []
    assert ex2.N == 44
    assert ex2.delta.times[-1] == 40.0


@pytest.mark.parametrize("name", shipped_problems())
def test_shipped_fixtures_valid(name):
    assert validate(load_problem(shipped_problem_path(name))) == []


def test_zero_R_rejected():
    doc = _doc()
    doc["cost"]["R"] = [[0.0]]
    with pytest.raises(ProblemValidationError, match="R not positive definite"):
        loads_problem(yaml.safe_dump(doc))


def test_negative_Q_names_Q():
    doc = _doc()
    doc["cost"]["Q"] = [[-1.0, 0.0], [0.0, 1.0]]
    violations = _violations(doc)
    assert len(violations) == 1 and violations[0].startswith("Q not positive semidefinite")


def test_repeated_time_rejected():
    doc = _doc()
    doc["times"] = [0, 1, 1, 2]
    assert _violations(doc) == ["delta not strictly increasing"]


def test_all_violations_reported():
    doc = _doc()
    doc["cost"]["R"] = [[-1.0]]
    doc["times"] = [0, 2, 1]
    assert len(_violations(doc)) == 2


def test_single_plant_valid():
    doc = _doc()
    doc["plants"] = doc["plants"][:1]
    assert len(problem_from_dict(doc).plants) == 1


def test_round_trip_exact(ex1, ex2):
    for problem in (ex1, ex2):
        again = loads_problem(dump_problem(problem))
        assert problems_equal(problem, again)
        assert problem_to_dict(again) == problem_to_dict(problem)


def test_round_trip_random_floats(rng):
    doc = _doc()
    doc["x0"] = rng.normal(size=2).tolist()
    doc["plants"][0]["A"] = rng.normal(size=(2, 2)).tolist()
    problem = problem_from_dict(doc)
    again = loads_problem(dump_problem(problem))
    np.testing.assert_array_equal(again.x0, problem.x0)
    np.testing.assert_array_equal(again.plants[0].A, problem.plants[0].A)


def test_near_symmetric_input_symmetrized():
    doc = _doc()
    doc["cost"]["Q"] = [[50.0, 1e-13], [0.0, 10.0]]
    problem = problem_from_dict(doc)
    np.testing.assert_array_equal(problem.cost.Q, problem.cost.Q.T)


def test_asymmetric_input_rejected():
    doc = _doc()
    doc["cost"]["Q"] = [[50.0, 1.0], [0.0, 10.0]]
    assert _violations(doc) == ["Q not symmetric"]


def test_malformed_document():
    with pytest.raises(ProblemFormatError):
        loads_problem("plants: [unclosed")
    with pytest.raises(ProblemFormatError):
        loads_problem("just a string")


def test_missing_file_names_path(tmp_path):
    missing = tmp_path / "nowhere.prob"
    with pytest.raises(FileNotFoundError, match="nowhere.prob"):
        load_problem(missing)


def test_dimension_mismatch():
    doc = _doc()
    doc["x0"] = [1.0, 2.0, 3.0]
    with pytest.raises((ProblemValidationError, ProblemFormatError), match="x0"):
        loads_problem(yaml.safe_dump(doc))


def test_full_convention_doubles_running_weights(ex1):
    G, Q, R = ex1.with_params(cost_convention="full_integral").weights()
    np.testing.assert_array_equal(G, ex1.cost.G)
    np.testing.assert_array_equal(Q, 2 * ex1.cost.Q)
    np.testing.assert_array_equal(R, 2 * ex1.cost.R)


def test_immutable(ex1):
    with pytest.raises(ValueError):
        ex1.x0[0] = 1.0
