import itertools

import pytest

from wnucsp.algebra import (
    conjunction_table,
    dual_discriminator_table,
    majority_table,
    make_algebra,
    minority_table,
    sum_table,
)
from wnucsp.instance import Constraint, Instance
from wnucsp.relation import Relation


@pytest.fixture(scope="session")
def z4():
    return make_algebra(range(4), sum_table(4, 5))


@pytest.fixture(scope="session")
def z2min():
    return make_algebra(range(2), minority_table())


@pytest.fixture(scope="session")
def maj2():
    return make_algebra(range(2), majority_table())


@pytest.fixture(scope="session")
def and3():
    return make_algebra(range(2), conjunction_table(3))


@pytest.fixture(scope="session")
def dd3():
    return make_algebra(range(3), dual_discriminator_table())


def linear_relation(alg, coeffs, rhs):
    """Solution set of a linear equation over Z_n as an explicit relation."""

    n = alg.size
    arity = len(coeffs)
    tuples = {
        t for t in itertools.product(range(n), repeat=arity)
        if sum(c * v for c, v in zip(coeffs, t)) % n == rhs
    }
    return Relation(arity, (alg,) * arity, tuples)


@pytest.fixture(scope="session")
def z4_example(z4):
    """The four-equation system over Z_4 used as the golden instance."""

    vs = ("x1", "x2", "x3", "x4")
    constraints = (
        Constraint(linear_relation(z4, (1, 2, 1, 1), 0), vs),
        Constraint(linear_relation(z4, (2, 1, 1, 1), 0), vs),
        Constraint(linear_relation(z4, (1, 1), 2), ("x1", "x2")),
        Constraint(linear_relation(z4, (1, 1, 2, 2), 0), vs),
    )
    return Instance(vs, (z4,) * 4, (frozenset(range(4)),) * 4, constraints)
