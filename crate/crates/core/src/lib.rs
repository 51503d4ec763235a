pub mod compression;
pub mod devices;
pub mod faulttol;
pub mod flightplan;
pub mod fsm;
pub mod scenario;
pub mod sim;
pub mod simkernel;
pub mod tasks;
pub mod telemetry;
