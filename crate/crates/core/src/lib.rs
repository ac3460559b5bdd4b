pub mod bounds;
pub mod martingale;
pub mod symmat;
pub mod verify;
