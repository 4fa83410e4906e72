use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use spseg::affinity::{self, AffinityParams};
use spseg::overseg::{self, OversegParams};
use spseg::propagate::{self, LabelState, PropagationMode, SourcePolicy};
use spseg::provider::{self, NoiseSpec};
use spseg::synth::{self, SceneSpec};
use spseg::{instance, spgraph};

struct Fixture {
    cloud: spseg::PointCloud,
    sp: spseg::Superpointization,
    graph: spseg::SuperpointGraph,
    bundle: spseg::PredictionBundle,
    params: AffinityParams,
    state: LabelState,
}

fn fixture() -> Fixture {
    let spec = SceneSpec {
        num_instances: 8,
        points_per_instance: (400, 600),
        rng_seed: 17,
        ..SceneSpec::default()
    };
    let cloud = synth::generate_scene(&spec).unwrap();
    let sp = overseg::oversegment(&cloud, &OversegParams::default()).unwrap();
    let graph = spgraph::build_graph(&sp.centroids, spgraph::DEFAULT_K).unwrap();
    let bundle =
        provider::oracle_predictions(&cloud, &sp, &NoiseSpec::default(), 0.05, 16).unwrap();
    let params = AffinityParams::identity_default(16, affinity::DEFAULT_HIDDEN, 3);
    let ann = synth::sample_weak_labels(&cloud, 5).unwrap();
    let weak = overseg::lift_labels(&sp, &ann).unwrap();
    let state = LabelState::from_weak_labels(&weak);
    Fixture { cloud, sp, graph, bundle, params, state }
}

fn bench_stages(c: &mut Criterion) {
    let f = fixture();

    c.bench_function("oversegment", |b| {
        b.iter(|| overseg::oversegment(&f.cloud, &OversegParams::default()).unwrap())
    });

    c.bench_function("knn_graph", |b| {
        b.iter(|| spgraph::build_graph(&f.sp.centroids, spgraph::DEFAULT_K).unwrap())
    });

    let aff =
        affinity::compute_affinity(&f.bundle.embeddings, &f.graph, &f.sp.centroids, &f.params)
            .unwrap();
    c.bench_function("affinity", |b| {
        b.iter(|| {
            affinity::compute_affinity(&f.bundle.embeddings, &f.graph, &f.sp.centroids, &f.params)
                .unwrap()
        })
    });

    let transitions = propagate::build_transitions(
        &f.graph,
        &aff,
        &f.bundle.semantics,
        PropagationMode::AffinitySemantic,
    )
    .unwrap();
    c.bench_function("propagate_t3", |b| {
        b.iter_batched(
            || f.state.clone(),
            |state| {
                propagate::propagate_labels(
                    &transitions,
                    &f.bundle.semantics,
                    &state,
                    3,
                    SourcePolicy::AnnotatedAndPseudo,
                )
                .unwrap()
            },
            BatchSize::SmallInput,
        )
    });

    let shifted = instance::shift_superpoints(&f.sp.centroids, &f.bundle.offsets).unwrap();
    let occupancy = instance::superpoint_voxel_occupancy(&f.cloud, &f.sp, 0.05).unwrap();
    c.bench_function("volume_aware_cluster", |b| {
        b.iter(|| {
            instance::volume_aware_cluster(
                &f.graph,
                &shifted,
                &f.bundle.semantics,
                &f.bundle.voxel_pred,
                &f.bundle.radius_pred,
                &occupancy,
                &f.sp,
                instance::DEFAULT_LAMBDA,
                instance::DEFAULT_BETA,
            )
            .unwrap()
        })
    });
}

criterion_group!(benches, bench_stages);
criterion_main!(benches);
