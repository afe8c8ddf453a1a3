"""PRB trading between network-slice tenants: radio model, market, coalition
formation, an exact Stackelberg equilibrium oracle and multi-agent learners."""

__version__ = "0.1.0"
