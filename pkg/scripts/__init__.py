"""Console entry points for the lattice package."""
