"""Random oriented drainage networks on Z^d: simulation and diagnostics."""
