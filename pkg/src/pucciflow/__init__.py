"""Numerical lab for flows u_t = F(D^2 u^m) driven by Pucci-type operators.

Modules: ``matrix_ops`` (operators on symmetric matrices), ``grid`` (domains,
grids, fields), ``stencil`` (monotone wide-stencil ``F_h``), ``flow``
(explicit time stepping), ``eigen`` (principal eigenpairs), ``geometry``
(concavity diagnostics), ``barriers`` (closed-form sub/supersolutions),
``verify`` (named experiments), ``config`` and ``cli``.
"""

__version__ = "0.1.0"
