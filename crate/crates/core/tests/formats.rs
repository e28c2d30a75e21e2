//! Plain-text formats survive a save/load round trip bit for bit.

use minnorm_core::analysis_radial::{load_profile, save_profile, surrogate_profile};
use minnorm_core::datagen::{dataset_radial_bump, load_dataset, save_dataset, RadialMixtureConfig};
use minnorm_core::initializers::{init_net, InitScheme};
use minnorm_core::nn_model::{load_checkpoint, save_checkpoint};
use minnorm_core::rng::StreamKey;

#[test]
fn dataset_checkpoint_and_profile_round_trip() {
    let dir = tempfile::tempdir().unwrap();

    let data = dataset_radial_bump(&RadialMixtureConfig::new(4), 25, &StreamKey::new(3, "data")).unwrap();
    let p = dir.path().join("data.csv");
    save_dataset(&data, &p).unwrap();
    let back = load_dataset(&p).unwrap();
    assert_eq!((back.x, back.y), (data.x, data.y));

    let net = init_net(InitScheme::XavierUniform { gain: 0.7 }, 9, 4, 11).unwrap();
    let p = dir.path().join("params.csv");
    save_checkpoint(&net, &p).unwrap();
    assert_eq!(load_checkpoint(&p).unwrap(), net);

    let profile = surrogate_profile(15, 301).unwrap();
    let p = dir.path().join("profile.csv");
    save_profile(&profile, &p).unwrap();
    assert_eq!(load_profile(&p).unwrap(), profile);
}
