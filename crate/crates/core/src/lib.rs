//! Layout editing engine: netlist model, layout state, placement and routing
//! engines, the command script language and its rule validator.

pub mod fixtures;
pub mod geom;
pub mod layout;
pub mod netlist;
pub mod placement;
pub mod routing;
pub mod script;
pub mod validate;
