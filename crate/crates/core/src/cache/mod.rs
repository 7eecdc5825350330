//! Reactive temporal caching (in progress).
