"""nvpoly: isotropic polytropes of the Nordstrom-Vlasov system."""
