//! One module per registered experiment.

pub mod s1_04;
pub mod s1_05;
pub mod cue_target;
pub mod readout;
pub mod s1_02;
pub mod s1_03;
pub mod s3_01;
pub mod s3_08;
pub mod s2_03;
pub mod s2_02;
pub mod s2_04;
pub mod s3_03;
pub mod s3_02;
pub mod s3_07;
pub mod s3_04;
pub mod s3_06;
pub mod s3_05;
