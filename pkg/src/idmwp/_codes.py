"""Integer codes shared by the compiled and vectorized kernels.

The kernels take plain arrays and ints so that both backends expose the same
call signature. The parameter vector layout is ``[a, b, v_free, tau, s0, l, delta]``
and a platoon state is packed as ``[x_1..x_N, v_1..v_N]`` with the leader first.
"""

# parameter vector slots
A, B, V_FREE, TAU, S0, LENGTH, DELTA = range(7)

# model variants
CLASSIC = 0
VEL_PROJ = 1
ACC_PROJ = 2
VEL_REG = 3
DIST_REG = 4
DISCONT = 5

# leader acceleration inside one step: a frozen value or the free-flow law
SEG_CONST = 0
SEG_FREE = 1

# full leader profiles, used by the fixed-step reference loop
LEAD_CONST = 0
LEAD_FREE = 1
LEAD_PIECEWISE = 2
LEAD_SINE = 3
