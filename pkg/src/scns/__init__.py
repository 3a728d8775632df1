"""Semi-compressible Navier-Stokes solver with adjoint-based optimal control."""
