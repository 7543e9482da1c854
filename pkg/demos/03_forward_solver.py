# %% [markdown]
# # An independent forward solver
#
# Backward Euler in time, second differences in space, exact Dirichlet data.
# It knows nothing about networks, which makes it a useful referee: with the
# true potential it should reproduce the manufactured solution, and its
# final-time field can stand in for measured data.

# %%
from invpot.oracle import FDGrid, refinement_orders, solve_forward
from invpot.problem import example1, example2

p = example1()
sol = solve_forward(p, p.q_exact, FDGrid.uniform(p.domain, 1 / 50, 1 / 200))
print("max nodal error", sol.max_error(p.u_exact))

# %% [markdown]
# Observed orders. u is quadratic in x for this example, so a plain h-halving
# shows no spatial error at all; the spatial order is measured by halving h
# and quartering k together.

# %%
print(refinement_orders(p, p.q_exact, p.domain, 1 / 25, 1 / 100))

# %%
p2 = example2()
sol2 = solve_forward(p2, p2.q_exact, FDGrid.uniform(p2.domain, 0.04, 0.01))
print(p2.name, "max error", sol2.max_error(p2.u_exact))
uT = sol2.final_field()
print("u(., T) lattice:", uT.values.shape)
