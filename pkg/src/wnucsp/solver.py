"""The main recursive decision procedure.

The pipeline per call: split fragments, then loop — cycle-consistency,
linked-component decomposition, irreducibility, solvability of the fully
weakened instance per pinned value, binary-absorbing / center / PC-class
reductions — and finally the linear phase, which factorizes by minimal
linear congruences, parameterizes the solution set of the system plus the
learned equations, probes the zero point, computes a crucial weakening, and
learns one new equation per round.

Recursion bookkeeping follows the four call types: single-domain reductions
loop in place, linked components and parameter-point reductions strictly
shrink domains, and weakened-instance descents are guarded by the
strictly-decreasing constraint order plus a configured depth cap.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .algebra import Algebra
from .classify import (
    StructureReport,
    find_binary_absorbing,
    find_center,
    pc_structure,
)
from .consistency import (
    check_irreducibility,
    enforce_cycle_consistency,
    is_linked,
    linked_components,
)
from .errors import (
    AffineStructureViolation,
    ConfigError,
    CspError,
    EmptyRelationError,
    InternalError,
)
from .instance import (
    Instance,
    apply_reduction,
    factorize_to_linear,
    fragment_variable_sets,
    make_crucial,
    restrict_to_variables,
    weaken_all,
)
from .linsolve import (
    Equation,
    LinearSystem,
    learn_hyperplane,
    solve_linear_system,
)


@dataclass(frozen=True)
class SolverConfig:
    center_arity_cap: int = 3
    max_type3_depth: int = 64
    max_phi_points: int = 4096
    max_crucial_rounds: int = 10_000
    trace: bool = False
    trace_sink: object = None


@dataclass(frozen=True)
class TraceEvent:
    step: str
    detail: str
    rtype: int | None
    depth: int
    type3_depth: int
    eq_size: int = 0


@dataclass(frozen=True)
class SolveOutcome:
    kind: str  # "sat" | "unsat"
    assignment: dict | None = None

    @property
    def satisfiable(self):
        return self.kind == "sat"


@dataclass(frozen=True)
class LearnedEquation:
    depth: int
    names: tuple
    coeffs: tuple
    rhs: int
    prime: int


class Solver:
    """One solving session: memo table, trace, and certificate log."""

    def __init__(self, config: SolverConfig | None = None):
        self.config = config or SolverConfig()
        self.memo = {}
        self.trace = []
        self.reports = []   # (Algebra, StructureReport) pairs, as applied
        self.learned = []   # LearnedEquation log

    # -- public entry

    def solve(self, inst: Instance) -> SolveOutcome:
        ok, assignment = self._solve(inst, 0, 0)
        if ok:
            return SolveOutcome("sat", assignment)
        return SolveOutcome("unsat")

    # -- plumbing

    def _emit(self, step, detail, rtype=None, depth=0, t3=0, eq_size=0):
        if not self.config.trace:
            return
        ev = TraceEvent(step, detail, rtype, depth, t3, eq_size)
        self.trace.append(ev)
        if self.config.trace_sink is not None:
            self.config.trace_sink(ev)

    def _solve(self, inst: Instance, depth, t3):
        key = inst.canonical_key()
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        ok, assignment = self._solve_main(inst, depth, t3)
        if ok:
            if not inst.assignment_satisfies(assignment):
                raise InternalError("solution failed the final verification")
        result = (ok, assignment)
        self.memo[key] = result
        return result

    # -- the pipeline

    def _solve_main(self, inst: Instance, depth, t3):
        frags = fragment_variable_sets(inst)
        if len(frags) > 1:
            assignment = {}
            for frag in frags:
                sub = restrict_to_variables(inst, frag)
                ok, a = self._solve(sub, depth + 1, t3)
                if not ok:
                    return False, None
                assignment.update(a)
            return True, assignment
        if not inst.constraints:
            return True, {
                v: min(inst.current_domains[i])
                for i, v in enumerate(inst.variables)
            }

        while True:
            if inst.all_singleton():
                assignment = {
                    v: next(iter(inst.current_domains[i]))
                    for i, v in enumerate(inst.variables)
                }
                return (True, assignment) if inst.assignment_satisfies(
                    assignment) else (False, None)

            # Step 1: cycle-consistency
            prop = enforce_cycle_consistency(inst)
            if prop.status == "nosolution":
                self._emit("1", "propagation emptied a pair", 1, depth, t3)
                return False, None
            if prop.status == "reduce":
                self._emit("1", "reduce %s to %s" % (prop.var, sorted(prop.subset)),
                           1, depth, t3)
                inst = apply_reduction(inst, {prop.var: prop.subset})
                continue

            # not linked: solve per linked component (type 2)
            if not is_linked(inst):
                return self._solve_unlinked(inst, depth, t3)

            # Step 2: irreducibility
            irr = check_irreducibility(
                inst, lambda sub: self._solve(sub, depth + 1, t3)[0]
            )
            if irr.status == "nosolution":
                self._emit("2", "projection solution set empty", 1, depth, t3)
                return False, None
            if irr.status == "reduce":
                self._emit("2", "reduce %s to %s" % (irr.var, sorted(irr.subset)),
                           1, depth, t3)
                inst = apply_reduction(inst, {irr.var: irr.subset})
                continue

            # Step 3: solvability of the weakened instance per pinned value
            step3 = self._step3(inst, depth, t3)
            if step3 == "unsat":
                return False, None
            if step3 is not None:
                var, good = step3
                self._emit("3", "reduce %s to %s" % (var, sorted(good)),
                           1, depth, t3)
                inst = apply_reduction(inst, {var: good})
                continue

            # Step 4: binary absorbing reduction
            red = self._step4(inst, depth, t3)
            if red is not None:
                inst = red
                continue

            # Step 5: center reduction
            red = self._step5(inst, depth, t3)
            if red is not None:
                inst = red
                continue

            # Step 6: PC congruence class reduction
            red = self._step6(inst, depth, t3)
            if red is not None:
                inst = red
                continue

            return self._linear_phase(inst, depth, t3)

    def _solve_unlinked(self, inst: Instance, depth, t3):
        comps = linked_components(inst)
        self._emit("2", "%d linked components" % len(comps), 2, depth, t3)
        for comp in comps:
            reduction = {}
            usable = True
            for i, var in enumerate(inst.variables):
                vals = frozenset(a for v, a in comp if v == var)
                if not vals:
                    usable = False
                    break
                if len(comps) > 1 and vals == inst.current_domains[i]:
                    raise InternalError("linked component does not shrink %s" % var)
                reduction[var] = vals
            if not usable:
                continue
            sub = apply_reduction(inst, reduction)
            ok, a = self._solve(sub, depth + 1, t3)
            if ok:
                return True, a
        return False, None

    def _step3(self, inst: Instance, depth, t3):
        weakened = weaken_all(inst)
        if t3 + 1 > self.config.max_type3_depth:
            raise InternalError("type-3 recursion exceeded its bound")
        self._check_type3_descent(inst, weakened)
        for i, var in enumerate(inst.variables):
            good = set()
            for b in sorted(inst.current_domains[i]):
                pinned = apply_reduction(weakened, {var: {b}})
                ok, _ = self._solve(pinned, depth + 1, t3 + 1)
                if ok:
                    good.add(b)
            if not good:
                return "unsat"
            if good != inst.current_domains[i]:
                return var, frozenset(good)
        return None

    def _check_type3_descent(self, inst: Instance, weakened: Instance):
        parents = [(set(c.scope), c.scope, inst.effective(c))
                   for c in inst.constraints]
        for wc in weakened.constraints:
            wset = set(wc.scope)
            ok = False
            for pset, pscope, peff in parents:
                if not wset <= pset:
                    continue
                pos = [pscope.index(v) for v in wc.scope]
                if all(tuple(t[i] for i in pos) in wc.relation.tuples
                       for t in peff.tuples):
                    if len(wc.scope) < len(pscope):
                        ok = True
                        break
                    if wc.relation.tuples > peff.tuples:
                        ok = True
                        break
            if not ok:
                raise InternalError("weakened constraint is not strictly below "
                                    "any parent")

    def _step4(self, inst: Instance, depth, t3):
        for i, var in enumerate(inst.variables):
            if len(inst.current_domains[i]) < 2:
                continue
            alg = inst.domain_algebra(var)
            ba = find_binary_absorbing(alg)
            if ba is not None:
                report = StructureReport("binary_absorbing",
                                         subuniverse=ba[0], term=ba[1])
                self.reports.append((alg, report))
                self._emit("4", "absorb %s into %s" % (var, sorted(ba[0])),
                           1, depth, t3)
                return apply_reduction(inst, {var: ba[0]})
        return None

    def _step5(self, inst: Instance, depth, t3):
        incomplete = False
        for i, var in enumerate(inst.variables):
            if len(inst.current_domains[i]) < 2:
                continue
            alg = inst.domain_algebra(var)
            search = find_center(alg, self.config.center_arity_cap)
            if search.center is not None:
                report = StructureReport("center", subuniverse=search.center,
                                         witness=search.witness)
                self.reports.append((alg, report))
                self._emit("5", "center %s to %s" % (var, sorted(search.center)),
                           1, depth, t3)
                return apply_reduction(inst, {var: search.center})
            if not search.complete:
                incomplete = True
        if incomplete:
            raise ConfigError("center search capped but later steps require "
                              "completeness")
        return None

    def _step6(self, inst: Instance, depth, t3):
        for i, var in enumerate(inst.variables):
            if len(inst.current_domains[i]) < 2:
                continue
            alg = inst.domain_algebra(var)
            pc_congs, _, _ = pc_structure(alg)
            if not pc_congs:
                continue
            maximal = [c for c in pc_congs
                       if not any(c is not d and c.refines(d) for d in pc_congs)]
            sigma = maximal[0]
            report = StructureReport("pc_quotient", congruence=sigma)
            self.reports.append((alg, report))
            block = frozenset(sigma.block_of(min(inst.current_domains[i])))
            self._emit("6", "PC class %s to %s" % (var, sorted(block)),
                       1, depth, t3)
            return apply_reduction(inst, {var: block})
        return None

    # -- the linear phase (Steps 7-13)

    def _linear_phase(self, inst: Instance, depth, t3):
        try:
            system, factors = factorize_to_linear(inst)
        except EmptyRelationError:
            return False, None
        for f in factors:
            if len(inst.domain(f.var)) > 1:
                alg = inst.domain_algebra(f.var)
                self.reports.append((alg, StructureReport(
                    "linear_quotient", congruence=f.conlin.congruence,
                    iso=f.conlin.iso)))
        self._emit("7", "linear phase over %d scalars" % len(system.scalar_vars),
                   None, depth, t3)
        equations = []
        while True:
            res = solve_linear_system(
                LinearSystem(system.scalar_vars,
                             system.equations + tuple(equations)))
            self._emit("8", "system solved: %s" % res.kind, None, depth, t3,
                       eq_size=len(equations))
            if res.kind == "inconsistent":
                return False, None
            if res.kind == "unique":
                reduced = self._point_reduction(inst, factors, res.assignment)
                return self._solve(reduced, depth + 1, t3)
            param = res.param
            if param.space_size() > self.config.max_phi_points:
                raise ConfigError("parameter space exceeds the point cap")
            zero = tuple([0] * len(param.free_vars))
            ok, a = self._solve_at_point(inst, factors, param, zero, depth, t3)
            self._emit("9", "zero point %s" % ("solved" if ok else "failed"),
                       4, depth, t3)
            if ok:
                return True, a

            oracle = self._unsat_somewhere_oracle(factors, param, depth, t3)
            theta_p = make_crucial(inst, oracle,
                                   max_rounds=self.config.max_crucial_rounds)
            self._emit("10", "crucial instance with %d constraints"
                       % len(theta_p.constraints), 3, depth, t3)

            solvable_points = {
                pt for pt in param.points()
                if self._solve_at_point(theta_p, factors, param, pt,
                                        depth, t3)[0]
            }
            if is_linked(theta_p):
                if not solvable_points:
                    self._emit("13", "no equation exists", None, depth, t3)
                    return False, None
                new_eq = self._learn_step13(param, solvable_points, system,
                                            depth)
            else:
                new_eq = self._learn_step12(param, solvable_points, system,
                                            depth)
            if self._implied_by_param(param, new_eq, system):
                raise InternalError("learned equation does not shrink the system")
            equations.append(new_eq)
            if len(equations) > len(system.scalar_vars):
                raise InternalError("more equations than scalar variables")

    def _point_reduction(self, inst: Instance, factors, scalar_values):
        reduction = {}
        for f in factors:
            if f.width == 0:
                continue
            group = tuple(scalar_values[f.offset:f.offset + f.width])
            block_idx = f.conlin.iso.from_group(group)
            block = frozenset(f.conlin.congruence.blocks[block_idx])
            if len(inst.domain(f.var)) > 1 and block == inst.domain(f.var):
                raise InternalError("linear class reduction does not shrink %s"
                                    % f.var)
            reduction[f.var] = block
        return apply_reduction(inst, reduction)

    def _solve_at_point(self, inst: Instance, factors, param, point, depth, t3):
        values = param.evaluate(point)
        reduced = self._point_reduction(inst, factors, values)
        return self._solve(reduced, depth + 1, t3)

    def _unsat_somewhere_oracle(self, factors, param, depth, t3):
        def oracle(candidate: Instance) -> bool:
            for pt in param.points():
                ok, _ = self._solve_at_point(candidate, factors, param, pt,
                                             depth, t3)
                if not ok:
                    return True
            return False
        return oracle

    def _learn_step12(self, param, solvable_points, system, depth):
        """Scan free-variable prefixes; at the first prefix length whose good
        set is proper, learn its hyperplane inside the newest prime block."""

        moduli = param.moduli
        k = len(moduli)
        for i in range(1, k + 1):
            good = {pt[:i] for pt in solvable_points}
            space = 1
            for q in moduli[:i]:
                space *= q
            if len(good) == space:
                continue
            p = moduli[i - 1]
            slots = [j for j in range(i) if moduli[j] == p]

            def oracle(v):
                prefix = [0] * i
                for idx, j in enumerate(slots):
                    prefix[j] = v[idx]
                return tuple(prefix) in good

            out = learn_hyperplane(oracle, p, len(slots))
            if out.kind != "equation":
                raise AffineStructureViolation(
                    "prefix good set is not a single-block hyperplane")
            for prefix in itertools.product(*(range(q) for q in moduli[:i])):
                lhs = sum(out.coeffs[idx] * prefix[j]
                          for idx, j in enumerate(slots)) % p
                if (lhs == out.rhs) != (prefix in good):
                    raise AffineStructureViolation(
                        "learned prefix equation does not match the good set")
            self._emit("12", "learned prefix equation at i=%d" % i,
                       None, depth, 0)
            return self._global_equation(param, system, slots, out, depth)
        raise InternalError("every prefix is covered although some point fails")

    def _learn_step13(self, param, solvable_points, system, depth):
        """The solvable points form the solution set of one equation living
        in a single prime block; find the block, learn, verify exactly."""

        moduli = param.moduli
        k = len(moduli)
        tried = []
        for p in dict.fromkeys(moduli):
            slots = [j for j in range(k) if moduli[j] == p]

            def oracle(v):
                point = [0] * k
                for idx, j in enumerate(slots):
                    point[j] = v[idx]
                return tuple(point) in solvable_points

            out = learn_hyperplane(oracle, p, len(slots))
            tried.append((p, out.kind))
            if out.kind != "equation":
                continue
            match = True
            for point in param.points():
                lhs = sum(out.coeffs[idx] * point[j]
                          for idx, j in enumerate(slots)) % p
                if (lhs == out.rhs) != (point in solvable_points):
                    match = False
                    break
            if match:
                self._emit("13", "learned equation in block p=%d" % p,
                           None, depth, 0)
                return self._global_equation(param, system, slots, out, depth)
        raise AffineStructureViolation(
            "no single-block equation describes the solvable points "
            "(tried %s)" % (tried,))

    def _global_equation(self, param, system, slots, out, depth):
        dense = [0] * len(system.scalar_vars)
        names = []
        for idx, j in enumerate(slots):
            scalar_index, name, _ = param.free_vars[j]
            dense[scalar_index] = out.coeffs[idx]
            names.append(name)
        p = param.free_vars[slots[0]][2]
        self.learned.append(LearnedEquation(depth, tuple(names),
                                            tuple(out.coeffs), out.rhs, p))
        return Equation(tuple(dense), out.rhs, p)

    def _implied_by_param(self, param, equation, system):
        """An equation already implied by the parameterized system holds at
        the zero point and at every unit point."""

        points = [tuple([0] * len(param.free_vars))]
        for j in range(len(param.free_vars)):
            unit = [0] * len(param.free_vars)
            unit[j] = 1
            points.append(tuple(unit))
        for pt in points:
            values = param.evaluate(pt)
            lhs = sum(c * v for c, v in zip(equation.coeffs, values))
            if lhs % equation.prime != equation.rhs:
                return False
        return True


def solve(inst: Instance, config: SolverConfig | None = None) -> SolveOutcome:
    return Solver(config).solve(inst)
