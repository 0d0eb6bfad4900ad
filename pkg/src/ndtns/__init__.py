"""Mixed-stress finite elements for incompressible finite elasticity in 2D."""
