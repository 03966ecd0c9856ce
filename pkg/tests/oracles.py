"""Reference values computed independently of the package and frozen here.

Closed forms and Hankel integrals were evaluated with mpmath at 30 digits.
The continuum Dirichlet eigenvalues of the unit disk come from a separate
Jacobi-polynomial Galerkin solver for the ball (weighted basis
``(1 - r²)^{α/2} P_k(2r² - 1)``), converged to ten digits.
"""

# A_{2,α}, the normalising constant of the Lévy density.
LEVY_CONSTANT = {
    1.2: 0.17674478557428508231,
    1.5: 0.17116712969055234293,
    1.8: 0.10084985986148906277,
}

# p_1(0) = Γ(2/α) / (2πα).
DENSITY_AT_ORIGIN = {
    1.2: 0.11973031310506852453,
    1.5: 0.094748068897354900543,
    1.8: 0.083730120110336236377,
}

# p_1(r) at α = 1.5.
DENSITY_RADIAL_15 = {
    0.5: 0.08536442570944975113,
    1.0: 0.063184557589447939038,
    2.0: 0.022439557829258658276,
}

# Principal Dirichlet eigenvalue of -Δ^{α/2} on the unit disk.
DISK_EIGENVALUE = {
    1.2: 2.4165164171,
    1.5: 3.2759375359,
    1.8: 4.5671809677,
}
