"""Early-warning and remaining-useful-life toolkit built on GP derivatives.

Submodules are independently usable: ``kernels``, ``gp_regression``,
``gp_classification``, ``changepoint``, ``wmd``, ``mjd``, ``rul`` and the
``pipeline`` that chains them.
"""

__version__ = "0.1.0"
