//! Deterministic engine for feedback-driven 3D scene synthesis.

pub mod action;
pub mod agent;
pub mod assets;
pub mod camera;
pub mod collision;
pub mod gateway;
pub mod geometry;
pub mod math;
pub mod render;
pub mod scene;
