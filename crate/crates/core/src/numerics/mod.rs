pub mod pchip;
pub mod quad;
pub mod root;
