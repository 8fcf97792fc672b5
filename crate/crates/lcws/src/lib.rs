//! Files, wire formats, object store, pipeline executor and benchmark
//! harness around [`lcws_core`].

mod codec;

pub mod bench;
pub mod executor;
pub mod keys;
pub mod store;
pub mod wire;

pub use codec::DecodeError;
