import pytest

from sceneqa.augment import augment_corpus
from sceneqa.graph import ActionSpan, FrameAnnotation, ObjectInstance, VideoGraph
from sceneqa.ontology import default_ontology
from sceneqa.synth import SynthParams, synth_corpus
from sceneqa.templates import default_registry


@pytest.fixture(scope="session")
def ontology():
    return default_ontology()


@pytest.fixture(scope="session")
def registry():
    return default_registry()


def make_graph(video_id="vid-1", duration=30.0, frames=(), actions=()):
    """Shorthand: frames as (timestamp, {object: {rels...}}), actions as tuples."""
    return VideoGraph(
        video_id=video_id,
        duration=duration,
        frames=tuple(
            FrameAnnotation(
                timestamp=ts,
                objects=tuple(
                    ObjectInstance(obj, frozenset(rels)) for obj, rels in sorted(objs.items())
                ),
            )
            for ts, objs in frames
        ),
        actions=tuple(ActionSpan(*a) for a in actions),
    )


@pytest.fixture(scope="session")
def small_corpus(ontology):
    graphs, _ = augment_corpus(
        synth_corpus(12, 5, SynthParams(ontology)), ontology
    )
    return graphs


@pytest.fixture(scope="session")
def generated(small_corpus, registry, ontology):
    from sceneqa.generator import GeneratorConfig, generate_corpus

    return generate_corpus(
        small_corpus, registry, ontology, seed=5, config=GeneratorConfig(per_video_cap=2000)
    )
