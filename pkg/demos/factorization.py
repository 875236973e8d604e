"""Unit-level values on a two-unit table: exact log-sum-exp values, the
single-sample lower bound, and the product of per-unit policies."""

import numpy as np

from dipaf.factorizer import JointQTable, exact_unit_q, factored_joint_policy, joint_policy, lower_bound_gaps

table = JointQTable.from_arrays([[1.0, 0.0], [0.0, 1.0]], np.log(np.full((2, 2), 0.25)), beta=0.0,
                                alphabets=[("a", "b"), ("x", "y")])
print("Q^1           ", exact_unit_q(table, 1).as_dict())
print("Q^2 | a       ", exact_unit_q(table, 2, ["a"]).as_dict())
print("gap at (a, x) ", lower_bound_gaps(table, (0, 0)))
print("joint policy\n", joint_policy(table))
print("product of unit policies\n", factored_joint_policy(table))
