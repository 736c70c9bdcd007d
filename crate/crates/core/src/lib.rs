pub mod certify;
pub mod cli;
pub mod fock;
pub mod freewords;
pub mod gns;
pub mod gram;
pub mod json;
pub mod linalg;
pub mod ncpoly;
pub mod sdp;
pub mod tol;
