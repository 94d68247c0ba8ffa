"""Steady states of the Nordstrom-Vlasov system: shooting, scaling and verification."""
