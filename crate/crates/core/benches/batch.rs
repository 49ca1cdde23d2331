use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use labgrader_core::analysis::{classify_jitter, measure_pwm, AnalysisConfig, JitterConfig};
use labgrader_core::engine::{capture_many, CaptureRequest};
use labgrader_core::par::{self, Execution};
use labgrader_core::{assemble, reference, CaptureConfig, DutProfile, Pin, Session};

fn batch(c: &mut Criterion) {
    let programs = [
        assemble(reference::HARDWARE_PWM).unwrap(),
        assemble(reference::SOFTWARE_PWM).unwrap(),
    ];
    let schedules: Vec<Vec<Session>> = (1..=8u64)
        .map(|k| vec![Session::new(0, 100 * k, 0.25), Session::new(20_000, 50 * k + 100, 0.6)])
        .collect();
    let cfg = CaptureConfig::new(1_000_000, 40_000, Pin(0));
    let requests: Vec<CaptureRequest<'_>> = schedules
        .iter()
        .flat_map(|s| {
            programs.iter().map(move |p| CaptureRequest {
                program: p,
                profile: DutProfile::V1,
                sessions: s,
                config: cfg,
            })
        })
        .collect();

    let mut group = c.benchmark_group("capture_and_analyze");
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| {
                let outputs = capture_many(&requests, exec);
                let pairs: Vec<_> = outputs.iter().zip(&requests).collect();
                par::map(exec, &pairs, |(out, req)| {
                    let cap = &out.as_ref().unwrap().capture;
                    let m = measure_pwm(cap, req.sessions, &AnalysisConfig::default()).unwrap();
                    let v = classify_jitter(cap, req.sessions, &JitterConfig::default()).unwrap();
                    (m.sessions.len(), v.class)
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, batch);
criterion_main!(benches);
