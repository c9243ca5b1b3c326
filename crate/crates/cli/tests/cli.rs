use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use deepxi::corpus::{load_wav, mix_at_snr, save_wav};
use deepxi::dsp::AudioSignal;
use deepxi::neural::{load_model, NetworkParams, NetworkShape};
use deepxi::synth::{toy_noise_corpus, toy_speech_corpus, tone_burst_speech, white_noise};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn deepxi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deepxi")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Corpus {
    _tmp: tempfile::TempDir,
    root: PathBuf,
}

impl Corpus {
    fn new() -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().to_path_buf();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (dir, sigs) in [
            ("clean", toy_speech_corpus(&mut rng, 4, 0.3, 0.5)),
            ("noise", toy_noise_corpus(&mut rng, 1.0)),
        ] {
            fs::create_dir_all(root.join(dir)).unwrap();
            for (i, s) in sigs.iter().enumerate() {
                save_wav(s, &root.join(dir).join(format!("{i}.wav"))).unwrap();
            }
        }
        Corpus { _tmp: tmp, root }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&deepxi(&["--help"])), 0);
    assert_eq!(code(&deepxi(&["--version"])), 0);
    assert_eq!(code(&deepxi(&["enhance", "--help"])), 0);
}

#[test]
fn bad_arguments_exit_one_and_write_nothing() {
    let c = Corpus::new();
    let out = c.path("out.wav");
    let noisy = c.path("noise/0.wav");
    let cases: Vec<Vec<&str>> = vec![
        vec!["enhance", "--input", p(&noisy), "--output", p(&out), "--estimator", "neural"],
        vec!["enhance", "--input", p(&noisy), "--output", p(&out), "--estimator", "oracle", "--clean", p(&noisy)],
        vec!["enhance", "--input", p(&noisy), "--output", p(&out), "--estimator", "dd", "--model", "m.bin"],
        vec!["enhance", "--input", p(&noisy), "--output", p(&out), "--estimator", "magic"],
        vec!["enhance", "--input", p(&noisy), "--output", p(&out), "--estimator", "dd", "--gain", "spectral"],
        vec!["enhance", "--input", p(&noisy)],
        vec!["frobnicate"],
    ];
    for args in cases {
        let o = deepxi(&args);
        assert_eq!(code(&o), 1, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!out.exists(), "{args:?} wrote output");
    }
}

#[test]
fn empty_snr_grid_is_a_usage_error() {
    let c = Corpus::new();
    let out_dir = c.path("mix");
    let o = deepxi(&["mix", "--clean", p(&c.path("clean")), "--noise", p(&c.path("noise")), "--out-dir", p(&out_dir), "--snr-grid", ","]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty grid"));
    assert!(!out_dir.exists());
}

#[test]
fn missing_data_exits_two() {
    let c = Corpus::new();
    let o = deepxi(&["enhance", "--estimator", "dd", "--input", p(&c.path("nope.wav")), "--output", p(&c.path("o.wav"))]);
    assert_eq!(code(&o), 2);
    fs::write(c.path("junk.wav"), b"not a wav").unwrap();
    let o = deepxi(&["enhance", "--estimator", "dd", "--input", p(&c.path("junk.wav")), "--output", p(&c.path("o.wav"))]);
    assert_eq!(code(&o), 2);
    assert!(!c.path("o.wav").exists());
}

#[test]
fn unity_gain_reproduces_the_input() {
    let c = Corpus::new();
    let (input, output) = (c.path("clean/1.wav"), c.path("same.wav"));
    let o = deepxi(&["enhance", "--estimator", "dd", "--unity-gain", "--input", p(&input), "--output", p(&output)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (x, y) = (load_wav(&input).unwrap(), load_wav(&output).unwrap());
    assert_eq!(x.len(), y.len());
    // One 16-bit quantisation step.
    let worst = x.samples.iter().zip(&y.samples).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst <= 1.0 / 32768.0 + 1e-12, "{worst}");
}

#[test]
fn dd_suppresses_pure_noise() {
    let c = Corpus::new();
    let noise = AudioSignal::new(white_noise(&mut ChaCha8Rng::seed_from_u64(8), 24_000).samples.iter().map(|v| v * 0.1).collect()).unwrap();
    save_wav(&noise, &c.path("n.wav")).unwrap();
    for gain in ["srwf", "wiener", "mmse-stsa"] {
        let o = deepxi(&["enhance", "--estimator", "dd", "--gain", gain, "--input", p(&c.path("n.wav")), "--output", p(&c.path("e.wav"))]);
        assert_eq!(code(&o), 0);
        let y = load_wav(&c.path("e.wav")).unwrap();
        assert!(y.rms() < 0.6 * noise.rms(), "{gain}: {} vs {}", y.rms(), noise.rms());
    }
}

#[test]
fn oracle_requires_matching_lengths() {
    let c = Corpus::new();
    let clean = tone_burst_speech(&mut ChaCha8Rng::seed_from_u64(1), 8000);
    let noise = white_noise(&mut ChaCha8Rng::seed_from_u64(2), 8000);
    let m = mix_at_snr(&clean, &noise, 0.0, 0).unwrap();
    save_wav(&m.noisy, &c.path("x.wav")).unwrap();
    save_wav(&m.clean, &c.path("c.wav")).unwrap();
    save_wav(&AudioSignal::new(m.noise.samples[..4000].to_vec()).unwrap(), &c.path("d.wav")).unwrap();
    let o = deepxi(&[
        "enhance", "--estimator", "oracle", "--input", p(&c.path("x.wav")), "--output", p(&c.path("y.wav")),
        "--clean", p(&c.path("c.wav")), "--noise", p(&c.path("d.wav")),
    ]);
    assert_eq!(code(&o), 2);
    assert!(!c.path("y.wav").exists());
}

#[test]
fn zero_epochs_saves_the_initial_network() {
    let c = Corpus::new();
    let stats = c.path("stats.txt");
    assert_eq!(code(&deepxi(&["--seed", "4", "stats", "--clean", p(&c.path("clean")), "--noise", p(&c.path("noise")), "--out", p(&stats)])), 0);
    let (model, loss) = (c.path("m.bin"), c.path("loss.csv"));
    let o = deepxi(&[
        "--seed", "21", "train", "--clean", p(&c.path("clean")), "--noise", p(&c.path("noise")), "--stats", p(&stats),
        "--model-out", p(&model), "--loss-csv", p(&loss), "--epochs", "0", "--batch-size", "2", "--cell-size", "8",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(&loss).unwrap(), "batch,loss\n");
    let shape = NetworkShape { cell_size: 8, ..NetworkShape::default() };
    assert_eq!(load_model(&model).unwrap(), NetworkParams::init(&shape, 21).unwrap());
}

#[test]
fn train_then_enhance_and_config_file() {
    let c = Corpus::new();
    let stats = c.path("stats.txt");
    let cfg = c.path("settings.conf");
    fs::write(&cfg, "# toy run\nseed = 5\nepochs = 1\nbatch_size = 2\ncell-size = 8\nblocks = 1\n").unwrap();
    assert_eq!(code(&deepxi(&["--config", p(&cfg), "stats", "--clean", p(&c.path("clean")), "--noise", p(&c.path("noise")), "--out", p(&stats)])), 0);
    let (model, loss) = (c.path("m.bin"), c.path("loss.csv"));
    let o = deepxi(&[
        "--config", p(&cfg), "train", "--clean", p(&c.path("clean")), "--noise", p(&c.path("noise")), "--stats", p(&stats),
        "--model-out", p(&model), "--loss-csv", p(&loss),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(&loss).unwrap().lines().count(), 1 + 2);
    assert_eq!(load_model(&model).unwrap().blocks.len(), 1);

    for gain in ["srwf", "mmse-stsa"] {
        let out = c.path(format!("{gain}.wav").as_str());
        let o = deepxi(&[
            "enhance", "--input", p(&c.path("noise/1.wav")), "--output", p(&out), "--model", p(&model), "--stats", p(&stats), "--gain", gain,
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(load_wav(&out).unwrap().len(), load_wav(&c.path("noise/1.wav")).unwrap().len());
    }

    fs::write(&cfg, "epochs = many\n").unwrap();
    let o = deepxi(&[
        "--config", p(&cfg), "train", "--clean", p(&c.path("clean")), "--noise", p(&c.path("noise")), "--stats", p(&stats),
        "--model-out", p(&c.path("m2.bin")), "--loss-csv", p(&loss),
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn mix_then_self_transcripts_score_zero() {
    let c = Corpus::new();
    let (out_dir, manifest) = (c.path("mix"), c.path("mix/manifest.tsv"));
    let o = deepxi(&["--seed", "2", "mix", "--clean", p(&c.path("clean")), "--noise", p(&c.path("noise")), "--out-dir", p(&out_dir), "--per-noise", "3", "--snr-grid", "-5,5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = deepxi::corpus::Manifest::load(&manifest).unwrap();
    assert_eq!(m.entries.len(), 2 * 3 * 2);
    let (refs, hyps) = (c.path("ref"), c.path("hyp"));
    fs::create_dir_all(&refs).unwrap();
    fs::create_dir_all(&hyps).unwrap();
    for e in &m.entries {
        assert!(out_dir.join(&e.output_path).exists() || e.output_path.exists());
        let stem = |q: &Path| q.file_stem().unwrap().to_string_lossy().into_owned();
        let text = format!("words of {}", stem(&e.clean_path));
        fs::write(refs.join(format!("{}.txt", stem(&e.clean_path))), &text).unwrap();
        fs::write(hyps.join(format!("{}.txt", stem(&e.output_path))), &text).unwrap();
    }
    let o = deepxi(&["wer", "--manifest", p(&manifest), "--ref-dir", p(&refs), "--hyp-dir", p(&hyps)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "noise,snr_db,n,wer_percent");
    assert_eq!(lines.len(), 1 + 2 * 2);
    assert!(lines[1..].iter().all(|l| l.ends_with(",3,0.00")), "{csv}");

    fs::remove_file(hyps.join(format!("{}.txt", m.entries[0].output_path.file_stem().unwrap().to_string_lossy()))).unwrap();
    let o = deepxi(&["wer", "--manifest", p(&manifest), "--ref-dir", p(&refs), "--hyp-dir", p(&hyps)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("manifest entry"));
}
