mod common;

use docadapt_core::model::Framework;
use docadapt_core::neural::ParamGroup;
use docadapt_core::workflow::{
    guidance_count, read_losses, run_adaptation, run_finetune, run_inference, select_guidance,
    sha256_hex, AdaptationPlan, Checkpoint, FinetuneStart, RunDir, RunRecord, StageTag, TaskMode,
    ADAPTED_ENCODERS,
};
use docadapt_core::Error;

fn plan(seed: u64) -> AdaptationPlan {
    AdaptationPlan {
        sds_epochs: 1,
        sst_epochs: 1,
        sit_epochs: 1,
        finetune_epochs: 2,
        batch_size: 2,
        seed,
        ..AdaptationPlan::default()
    }
}

const ALL_GROUPS: [ParamGroup; 9] = [
    ParamGroup::TokenEncoder,
    ParamGroup::EntityEncoder,
    ParamGroup::Layout,
    ParamGroup::JointEncoder,
    ParamGroup::Alignment,
    ParamGroup::TokenDecoder,
    ParamGroup::EntityDecoder,
    ParamGroup::TagHead,
    ParamGroup::RetrievalHead,
];

#[test]
fn adaptation_is_deterministic() {
    let s = common::splits(6, 4, 2, 3);
    let a = run_adaptation(&s.d_n, s.spec.clone(), &plan(3)).unwrap();
    let b = run_adaptation(&s.d_n, s.spec.clone(), &plan(3)).unwrap();
    assert_eq!(
        a.checkpoint.to_bytes().unwrap(),
        b.checkpoint.to_bytes().unwrap()
    );
    assert_eq!(a.losses, b.losses);
}

#[test]
fn checkpoint_round_trip_is_byte_stable() {
    let s = common::splits(4, 2, 1, 1);
    let out = run_adaptation(&s.d_n, s.spec.clone(), &plan(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.bin");
    out.checkpoint.save(&path).unwrap();
    let first = std::fs::read(&path).unwrap();
    Checkpoint::load(&path).unwrap().save(&path).unwrap();
    assert_eq!(first, std::fs::read(&path).unwrap());
    assert_eq!(Checkpoint::load(&path).unwrap().stage, StageTag::Fn);
}

#[test]
fn one_loss_per_step() {
    let s = common::splits(5, 2, 1, 2);
    let out = run_adaptation(&s.d_n, s.spec.clone(), &plan(2)).unwrap();
    let steps = out.checkpoint.metrics["steps"] as usize;
    assert_eq!(out.losses.len(), steps);
    // 5 documents in batches of 2, over three stages of one epoch
    assert_eq!(steps, 9);
    for (i, l) in out.losses.iter().enumerate() {
        assert_eq!(l.step, i);
        assert!(l.loss.is_finite());
    }
    let stages: Vec<&str> = out.losses.iter().map(|l| l.stage.as_str()).collect();
    assert_eq!(stages.iter().filter(|&&s| s == "sds").count(), 3);
    assert_eq!(stages.iter().filter(|&&s| s == "sst").count(), 3);
    assert_eq!(stages.iter().filter(|&&s| s == "sit").count(), 3);
}

#[test]
fn zero_learning_rate_leaves_every_group_untouched() {
    let s = common::splits(4, 2, 1, 5);
    let p = AdaptationPlan {
        learning_rate: 0.0,
        ..plan(5)
    };
    let fresh = Framework::new(s.spec.clone()).unwrap();
    let out = run_adaptation(&s.d_n, s.spec.clone(), &p).unwrap();
    for g in ALL_GROUPS {
        assert!(
            out.checkpoint.model.store.group_bits_equal(&fresh.store, g),
            "{g:?}"
        );
    }
}

#[test]
fn stage_isolation() {
    let s = common::splits(4, 2, 1, 6);
    let fresh = Framework::new(s.spec.clone()).unwrap();
    let only_sst = AdaptationPlan {
        sds_epochs: 0,
        sit_epochs: 0,
        freeze_after_sds: false,
        ..plan(6)
    };
    let m = run_adaptation(&s.d_n, s.spec.clone(), &only_sst)
        .unwrap()
        .checkpoint
        .model;
    assert!(!m
        .store
        .group_bits_equal(&fresh.store, ParamGroup::TokenDecoder));
    for g in [
        ParamGroup::EntityDecoder,
        ParamGroup::TagHead,
        ParamGroup::RetrievalHead,
        ParamGroup::Alignment,
    ] {
        assert!(m.store.group_bits_equal(&fresh.store, g), "{g:?}");
    }

    let only_sds = AdaptationPlan {
        sst_epochs: 0,
        sit_epochs: 0,
        ..plan(6)
    };
    let m = run_adaptation(&s.d_n, s.spec.clone(), &only_sds)
        .unwrap()
        .checkpoint
        .model;
    for g in ADAPTED_ENCODERS {
        assert!(!m.store.group_bits_equal(&fresh.store, g), "{g:?}");
        assert!(m.store.is_group_frozen(g));
    }
    for g in [
        ParamGroup::TokenDecoder,
        ParamGroup::EntityDecoder,
        ParamGroup::TagHead,
        ParamGroup::RetrievalHead,
    ] {
        assert!(m.store.group_bits_equal(&fresh.store, g), "{g:?}");
    }
}

#[test]
fn frozen_encoders_survive_finetuning() {
    let s = common::splits(4, 4, 1, 7);
    let f_n = run_adaptation(&s.d_n, s.spec.clone(), &plan(7))
        .unwrap()
        .checkpoint;
    let f_nt = run_finetune(&s.d_g, FinetuneStart::Adapted(f_n.clone()), &plan(7), 1.0)
        .unwrap()
        .checkpoint;
    assert_eq!(f_nt.stage, StageTag::Fnt);
    for g in ADAPTED_ENCODERS {
        assert!(
            f_nt.model.store.group_bits_equal(&f_n.model.store, g),
            "{g:?}"
        );
    }
    assert!(!f_nt
        .model
        .store
        .group_bits_equal(&f_n.model.store, ParamGroup::TagHead));
    assert!(!f_nt
        .model
        .store
        .group_bits_equal(&f_n.model.store, ParamGroup::TokenDecoder));
}

#[test]
fn unfrozen_plan_updates_encoders_during_finetuning() {
    let s = common::splits(4, 4, 1, 8);
    let p = AdaptationPlan {
        freeze_after_sds: false,
        ..plan(8)
    };
    let f_n = run_adaptation(&s.d_n, s.spec.clone(), &p)
        .unwrap()
        .checkpoint;
    let f_nt = run_finetune(&s.d_g, FinetuneStart::Adapted(f_n.clone()), &p, 1.0)
        .unwrap()
        .checkpoint;
    assert!(!f_nt
        .model
        .store
        .group_bits_equal(&f_n.model.store, ParamGroup::TokenEncoder));
}

#[test]
fn frozen_decoders_switch() {
    let s = common::splits(4, 4, 1, 9);
    let p = AdaptationPlan {
        finetune_decoders: false,
        ..plan(9)
    };
    let f_n = run_adaptation(&s.d_n, s.spec.clone(), &p)
        .unwrap()
        .checkpoint;
    let f_nt = run_finetune(&s.d_g, FinetuneStart::Adapted(f_n.clone()), &p, 1.0)
        .unwrap()
        .checkpoint;
    for g in [ParamGroup::TokenDecoder, ParamGroup::EntityDecoder] {
        assert!(
            f_nt.model.store.group_bits_equal(&f_n.model.store, g),
            "{g:?}"
        );
    }
    // the switch only applies during fine-tuning
    assert!(!f_nt.model.store.is_group_frozen(ParamGroup::TokenDecoder));
}

#[test]
fn finetune_from_scratch_is_tagged_ft() {
    let s = common::splits(2, 4, 1, 10);
    let out = run_finetune(
        &s.d_g,
        FinetuneStart::Scratch(s.spec.clone()),
        &plan(10),
        0.5,
    )
    .unwrap();
    assert_eq!(out.checkpoint.stage, StageTag::Ft);
    assert_eq!(out.checkpoint.metrics["guidance_docs"], 2.0);
}

#[test]
fn finetune_rejects_synthetic_documents() {
    let s = common::splits(3, 1, 1, 11);
    let err = run_finetune(
        &s.d_n,
        FinetuneStart::Scratch(s.spec.clone()),
        &plan(11),
        1.0,
    )
    .unwrap_err();
    assert!(matches!(err, Error::InvalidConfig(_)), "{err}");
}

#[test]
fn adaptation_rejects_gold_documents() {
    let s = common::splits(1, 3, 1, 12);
    let err = run_adaptation(&s.d_g, s.spec.clone(), &plan(12)).unwrap_err();
    assert!(matches!(err, Error::InvalidConfig(_)), "{err}");
}

#[test]
fn sst_without_tags_is_a_missing_annotation() {
    let s = common::splits(3, 1, 1, 13);
    let mut d_n = s.d_n.clone();
    d_n[1].tokens[0].synthetic_label = None;
    let p = AdaptationPlan {
        task_mode: TaskMode::Fine,
        ..plan(13)
    };
    let err = run_adaptation(&d_n, s.spec.clone(), &p).unwrap_err();
    assert!(matches!(err, Error::MissingAnnotation { .. }), "{err}");
}

#[test]
fn guidance_selection() {
    assert_eq!(guidance_count(0.1, 30).unwrap(), 3);
    assert_eq!(guidance_count(0.25, 10).unwrap(), 3);
    assert_eq!(guidance_count(1.0, 7).unwrap(), 7);
    assert!(matches!(
        guidance_count(0.1, 5),
        Err(Error::EmptyGuidance { .. })
    ));
    assert!(matches!(
        guidance_count(0.0, 5),
        Err(Error::InvalidConfig(_))
    ));
    assert!(matches!(
        guidance_count(1.5, 5),
        Err(Error::InvalidConfig(_))
    ));

    let s = common::splits(1, 10, 1, 14);
    let a: Vec<&str> = select_guidance(&s.d_g, 0.5, 1)
        .unwrap()
        .iter()
        .map(|d| d.id.as_str())
        .collect();
    let b: Vec<&str> = select_guidance(&s.d_g, 0.5, 1)
        .unwrap()
        .iter()
        .map(|d| d.id.as_str())
        .collect();
    assert_eq!(a, b);
    assert_eq!(a.len(), 5);
    let small: Vec<&str> = select_guidance(&s.d_g, 0.2, 1)
        .unwrap()
        .iter()
        .map(|d| d.id.as_str())
        .collect();
    assert_eq!(small, a[..2]);
}

#[test]
fn inference_on_empty_set_is_empty() {
    let s = common::splits(1, 1, 1, 15);
    let m = Framework::new(s.spec.clone()).unwrap();
    assert!(run_inference(&[], &m, TaskMode::Both).unwrap().is_empty());
    let rows = run_inference(&s.d_i, &m, TaskMode::Both).unwrap();
    let labelled = s.d_i[0]
        .tokens
        .iter()
        .filter(|t| t.gold_label.is_some())
        .count();
    assert_eq!(rows.len(), labelled + s.d_i[0].qa_pairs.len());
}

#[test]
fn run_dir_layout() {
    let s = common::splits(3, 1, 1, 16);
    let p = plan(16);
    let out = run_adaptation(&s.d_n, s.spec.clone(), &p).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let dir = RunDir::new(tmp.path().join("runs/demo"));
    let bytes = out.checkpoint.to_bytes().unwrap();
    let record = RunRecord {
        name: "demo".into(),
        stage: StageTag::Fn,
        plan: p.clone(),
        plan_hash: p.hash(),
        seed: 16,
        corpus_hash: "x".into(),
        checkpoint_sha256: sha256_hex(&bytes),
        guidance_ratio: None,
        parent_checkpoint: None,
        metrics: out.checkpoint.metrics.clone(),
        command: vec![],
    };
    let path = dir.save(&out.checkpoint, &out.losses, &record).unwrap();
    assert_eq!(path, tmp.path().join("runs/demo/ckpt-F_n.bin"));
    assert_eq!(
        sha256_hex(&std::fs::read(&path).unwrap()),
        record.checkpoint_sha256
    );
    assert_eq!(dir.load_record().unwrap(), record);
    assert_eq!(read_losses(&dir.losses_path()).unwrap(), out.losses);
}
