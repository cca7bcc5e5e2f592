"""Train a student network on teacher-generated data with all four methods.

Generates a noisy synthetic regression task from a seeded teacher network,
then runs B2LD, the full-LBFGS baseline, BLInG, and IG from the same random
initial weights and prints a side-by-side comparison.

Run from the repository root:
    python3 demos/teacher_student.py
"""

from layeropt import (SeededRng, StoppingCriteria, fit_apply_normalization,
                      init_weights, parse_architecture, run_single,
                      synth_teacher_dataset, train_test_split)

TEACHER = "8-[2x16]-1"
STUDENT = "8-[4x20]-1"
SAMPLES = 800
NOISE_SD = 0.02
SEED = 7


def main():
    teacher = parse_architecture(TEACHER)
    ds = synth_teacher_dataset(teacher, SAMPLES, NOISE_SD, seed=SEED)
    train, test = train_test_split(ds, 0.2, seed=SEED)
    train, test, _ = fit_apply_normalization(train, test)
    print(f"teacher {TEACHER}, student {STUDENT}, "
          f"{train.num_samples} train / {test.num_samples} test samples\n")

    student = parse_architecture(STUDENT)
    stop = StoppingCriteria(time_limit_seconds=30.0, max_cycles=50,
                            max_epochs=200, max_inner_iters=400)

    print(f"{'algorithm':<8} {'train objective':>16} {'test mse':>12} "
          f"{'seconds':>8}  stop")
    for algorithm in ("B2LD", "LBFGS", "BLInG", "IG"):
        weights0 = init_weights(student, SeededRng(SEED))
        run, tmse = run_single(algorithm, weights0, train, test, stop,
                               batch_size=64, seed=SEED)
        print(f"{algorithm:<8} {run.final_objective:>16.6e} {tmse:>12.4e} "
              f"{run.elapsed_seconds:>8.2f}  {run.stop_reason}")


if __name__ == "__main__":
    main()
