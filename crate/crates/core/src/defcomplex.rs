//! Deformation complex (stub).
