//! Python bindings; populated alongside the core library.
