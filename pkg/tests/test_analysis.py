import numpy as np
import pytest
from pydantic import ValidationError

from analysis.angular import angular_stats, positive_angles, summarize_angles
from analysis.groups import Group, GroupThresholds, assign_groups, group_accuracy, per_class_accuracy
from analysis.report import AnalysisReport, ClassRow, read_class_table, read_report, write_report
from analysis.separability import class_separability, fisher_J, lda_direction, pair_criterion
from core.numerics import CosineHead
from utils.exceptions import (
    DegenerateVarianceError,
    InsufficientSamplesError,
    LengthMismatchError,
    SingularScatterError,
)


def unit_at(degrees):
    radians = np.radians(np.asarray(degrees, dtype=np.float64))
    return np.stack([np.cos(radians), np.sin(radians)], axis=1)


def random_classes(rng, counts, dim=4, spread=1.0):
    centers = rng.normal(scale=3.0, size=(len(counts), dim))
    labels = np.repeat(np.arange(len(counts)), counts)
    return centers[labels] + rng.normal(scale=spread, size=(labels.size, dim)), labels


# Groups

def test_group_accuracy_example():
    labels = np.array([0, 0, 1, 1, 2, 2])
    predictions = np.array([0, 0, 1, 0, 2, 1])
    accuracy = group_accuracy(predictions, labels, [150, 50, 10], GroupThresholds())
    assert (accuracy.many, accuracy.medium, accuracy.few) == (1.0, 0.5, 0.5)
    assert accuracy.all == pytest.approx(4 / 6)


def test_group_boundaries_are_exclusive():
    groups = assign_groups([101, 100, 20, 19], GroupThresholds(many_min=100, few_max=20))
    assert groups == [Group.MANY, Group.MEDIUM, Group.MEDIUM, Group.FEW]


def test_empty_group_is_none():
    accuracy = group_accuracy(np.array([0, 1, 2]), np.array([0, 1, 2]), [150, 150, 10], GroupThresholds())
    assert accuracy.medium is None
    assert accuracy.all == 1.0


def test_group_accuracies_recompose_overall(rng):
    counts = [300, 120, 60, 30, 15, 5]
    labels = np.repeat(np.arange(6), 20)
    predictions = np.where(rng.random(labels.size) < 0.7, labels, rng.integers(0, 6, size=labels.size))
    accuracy = group_accuracy(predictions, labels, counts, GroupThresholds())
    sizes = {Group.MANY: 40, Group.MEDIUM: 40, Group.FEW: 40}
    combined = sum(getattr(accuracy, g.value) * n for g, n in sizes.items()) / 120
    assert combined == pytest.approx(accuracy.all)


def test_group_accuracy_length_mismatch():
    with pytest.raises(LengthMismatchError):
        group_accuracy(np.array([0, 1]), np.array([0]), [10, 10], GroupThresholds())


def test_thresholds_validation_and_terciles():
    with pytest.raises(ValidationError):
        GroupThresholds(many_min=5, few_max=10)
    thresholds = GroupThresholds.from_terciles([300, 200, 100, 50, 20, 10, 5])
    assert thresholds.few_max <= thresholds.many_min
    groups = assign_groups([300, 200, 100, 50, 20, 10, 5], thresholds)
    assert groups[0] == Group.MANY
    assert groups[-1] == Group.FEW


def test_per_class_accuracy():
    assert per_class_accuracy(np.array([0, 1, 1]), np.array([0, 1, 0]), 3) == [0.5, 1.0, None]


# Angular statistics

def test_angle_quartiles_example():
    head = CosineHead(np.array([[1.0, 0.0], [0.0, 1.0]]))
    angles = positive_angles(unit_at([10, 20, 30, 40]), np.zeros(4, dtype=int), head)
    assert np.allclose(angles, [10, 20, 30, 40], atol=1e-6)
    summary = summarize_angles(angles)
    assert (summary.q1, summary.median, summary.q3, summary.mean) == pytest.approx((17.5, 25.0, 32.5, 25.0), abs=1e-6)
    assert summarize_angles(np.array([])) is None


def test_angles_at_center_and_orthogonal():
    head = CosineHead(np.array([[2.0, 0.0], [0.0, 1.0]]))
    at_center = angular_stats(np.array([[5.0, 0.0], [0.0, 3.0]]), np.array([0, 1]), head)
    assert at_center.all.mean == pytest.approx(0.0, abs=0.05)
    orthogonal = angular_stats(np.array([[0.0, 5.0]]), np.array([0]), head)
    assert orthogonal.all.mean == pytest.approx(90.0, abs=1e-6)
    assert orthogonal.per_class_mean == [pytest.approx(90.0, abs=1e-6), None]


def test_moving_features_toward_centers_shrinks_angles(rng):
    head = CosineHead(np.eye(3))
    labels = rng.integers(0, 3, size=60)
    features = rng.normal(size=(60, 3))
    before = angular_stats(features, labels, head).all.mean
    after = angular_stats(0.5 * features + 2.0 * np.eye(3)[labels], labels, head).all.mean
    assert after < before


def test_angular_groups_follow_thresholds(rng):
    head = CosineHead(np.eye(3))
    labels = np.repeat([0, 1, 2], 5)
    stats = angular_stats(rng.normal(size=(15, 3)), labels, head, [150, 150, 10], GroupThresholds())
    assert stats.many.count == 10
    assert stats.medium is None
    assert stats.few.count == 5


# Separability

def test_fisher_criterion_examples():
    assert fisher_J([0.0, 2.0], [4.0, 6.0]) == pytest.approx(8.0)
    assert fisher_J([0.0, 2.0], [1.0, 1.0]) == 0.0
    assert fisher_J(-3.0 * np.array([0.0, 2.0]) + 7.0, -3.0 * np.array([4.0, 6.0]) + 7.0) == pytest.approx(8.0)


def test_fisher_criterion_degenerate_cases():
    assert fisher_J([1.0, 1.0], [2.0, 2.0]) == float("inf")
    with pytest.raises(DegenerateVarianceError):
        fisher_J([1.0, 1.0], [2.0, 2.0], strict=True)
    with pytest.raises(InsufficientSamplesError):
        fisher_J([1.0], [2.0, 3.0])


def test_lda_one_dimensional():
    w = lda_direction(np.array([0.0, 2.0]), np.array([4.0, 6.0]))
    assert w.shape == (1,)
    assert w[0] < 0
    assert pair_criterion(np.array([0.0, 2.0]), np.array([4.0, 6.0])) == pytest.approx(8.0)


def test_lda_isotropic_scatter_points_along_mean_gap():
    offsets = np.vstack([np.eye(3), -np.eye(3)])
    mu_i, mu_j = np.array([1.0, 2.0, 0.5]), np.array([-1.0, 0.0, 3.0])
    w = lda_direction(mu_i + offsets, mu_j + offsets, ridge=0.0)
    gap = mu_i - mu_j
    assert w @ gap / (np.linalg.norm(w) * np.linalg.norm(gap)) == pytest.approx(1.0, abs=1e-12)


def test_large_ridge_tends_to_mean_gap(rng):
    x_i = rng.normal(size=(30, 3)) @ np.diag([5.0, 1.0, 0.2])
    x_j = rng.normal(size=(30, 3)) + 1.0
    w = lda_direction(x_i, x_j, ridge=1e8)
    gap = x_i.mean(axis=0) - x_j.mean(axis=0)
    assert w @ gap / (np.linalg.norm(w) * np.linalg.norm(gap)) > 1.0 - 1e-6


def test_lda_errors():
    points = np.ones((3, 2))
    with pytest.raises(SingularScatterError):
        lda_direction(points, 2.0 * points, ridge=0.0)
    with pytest.raises(InsufficientSamplesError):
        lda_direction(np.ones((1, 2)), points)
    with pytest.raises(ValueError):
        lda_direction(np.eye(2), -np.eye(2), ridge=-1.0)


def test_two_classes_are_symmetric(rng):
    features, labels = random_classes(rng, [20, 30])
    report = class_separability(features, labels)
    assert report.per_class[0] == report.per_class[1]


def test_separability_is_rigid_motion_invariant(rng):
    features, labels = random_classes(rng, [25, 20, 15])
    rotation, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    base = class_separability(features, labels).per_class
    moved = class_separability(features @ rotation.T + np.array([3.0, -1.0, 0.5, 10.0]), labels).per_class
    assert moved == pytest.approx(base, rel=1e-8)


def test_identical_distributions_are_barely_separable(rng):
    features = rng.normal(size=(1000, 4))
    labels = np.repeat([0, 1], 500)
    assert class_separability(features, labels).all < 0.5


def test_duplicating_samples_keeps_statistics(rng):
    features, labels = random_classes(rng, [25, 20, 15])
    head = CosineHead(rng.normal(size=(3, 4)))
    doubled_x, doubled_y = np.vstack([features, features]), np.concatenate([labels, labels])
    assert class_separability(doubled_x, doubled_y).per_class == pytest.approx(
        class_separability(features, labels).per_class, rel=1e-9
    )
    assert angular_stats(doubled_x, doubled_y, head).per_class_mean == pytest.approx(
        angular_stats(features, labels, head).per_class_mean, rel=1e-12
    )


def test_threads_do_not_change_results(rng):
    features, labels = random_classes(rng, [30, 20, 15, 10, 5])
    counts = [300, 120, 60, 30, 10]
    single = class_separability(features, labels, train_counts=counts)
    threaded = class_separability(features, labels, train_counts=counts, threads=3)
    assert single == threaded
    assert single.many is not None and single.few is not None


def test_separability_needs_two_samples_per_class(rng):
    with pytest.raises(InsufficientSamplesError):
        class_separability(rng.normal(size=(5, 2)), np.array([0, 0, 0, 0, 1]))


# Report files

def test_report_round_trip(tmp_path, rng):
    features, labels = random_classes(rng, [12, 8, 4], dim=3)
    head = CosineHead(rng.normal(size=(3, 3)))
    counts = [120, 50, 10]
    thresholds = GroupThresholds()
    report = AnalysisReport(
        config_hash="abc",
        head="cosine",
        thresholds=thresholds.model_dump(),
        accuracy=group_accuracy(labels, labels, counts, thresholds),
        angular={"test": angular_stats(features, labels, head, counts, thresholds)},
        separability={"test": class_separability(features, labels, train_counts=counts)},
        classes=[
            ClassRow(class_index=i, train_count=n, group=g.value, accuracy=1.0, mean_angle_test=12.5)
            for i, (n, g) in enumerate(zip(counts, assign_groups(counts, thresholds)))
        ],
    )
    json_path, csv_path = write_report(report, tmp_path)
    assert read_report(json_path) == report

    rows = read_class_table(csv_path)
    assert [row.class_index for row in rows] == [0, 1, 2]
    assert [row.group for row in rows] == ["many", "medium", "few"]
    assert rows[0].mean_angle_test == pytest.approx(12.5)
    assert rows[0].separability_train is None
