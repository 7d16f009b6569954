"""Template corpus, manual rendering, and train/eval split construction.

The corpus lives in two frozen data files (see ``scripts/build_corpus.py``):

``data/corpus_rtfm.txt``
    ``kind<TAB>id<TAB>split<TAB>text`` records; kinds are ``goal`` (12
    templates), ``team`` (10), ``mod`` (10).  Template 0 of each kind is the
    canonical statement form used below stage S5.

``data/corpus_messenger.txt``
    ``template<TAB>id<TAB>split<TAB>text`` records (82 templates, each with
    one ``{entity}``, ``{role}`` and ``{adjective}`` blank) plus
    ``entity``/``role``/``adjective`` synonym records, three synonyms each.

Counts are asserted at load time; they are part of the artifact contract.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

from .core import Rng, digest_of

SPLITS = ("train", "eval", "eval_new")

RTFM_MONSTERS = ("wolf", "jaguar", "panther", "goblin", "bat", "imp", "shaman", "ghost", "zombie")
RTFM_WEAPONS = ("sword", "axe", "morningstar", "polearm", "knife", "katana", "cutlass", "spear")
RTFM_ELEMENTS = ("cold", "fire", "lightning", "poison")
RTFM_MODIFIERS = (
    "grandmaster",
    "blessed",
    "shimmering",
    "gleaming",
    "fanatical",
    "mysterious",
    "soldier",
    "arcane",
)
RTFM_TEAMS = ("star alliance", "order of the forest", "rebel enclave")

RTFM_NEW_MONSTERS = ("tiger", "bear", "puma", "elf", "vampire", "gremlin", "witch", "specter", "robot")
RTFM_NEW_WEAPONS = ("sabre", "tomahawk", "sunglow")
RTFM_NEW_MODIFIERS = (
    "superstars",
    "sacred",
    "glittering",
    "shiny",
    "obsessive",
    "bizarre",
    "secret",
    "esoteric",
)

MESSENGER_ROLES = ("enemy", "message", "goal")
MESSENGER_MOVEMENTS = ("stationary", "random", "chasing", "fleeing")
MESSENGER_MOVEMENT_PHRASES = {
    "stationary": "it never moves.",
    "random": "it wanders with no pattern.",
    "chasing": "it closes in on you.",
    "fleeing": "it keeps its distance from you.",
}
MESSENGER_GOAL_SENTENCE = "deliver every message to its own target."

DEFAULT_SPLIT_SEED = 20240
TRAIN_FRACTION = 0.8


class GenerationError(RuntimeError):
    """Episode or split construction could not satisfy its constraints."""


@dataclass(frozen=True)
class RtfmTemplates:
    goal: tuple[str, ...]
    team: tuple[str, ...]
    modifier: tuple[str, ...]


@dataclass(frozen=True)
class MessengerCorpus:
    templates: tuple[str, ...]
    template_splits: tuple[str, ...]  # "train" / "eval" per template id
    entity_synonyms: dict[str, tuple[str, str, str]]
    role_synonyms: dict[str, tuple[str, str, str]]
    role_adjectives: dict[str, tuple[str, str, str]]

    @property
    def entities(self) -> tuple[str, ...]:
        return tuple(self.entity_synonyms)

    def template_ids(self, split: str) -> tuple[int, ...]:
        want = "eval" if split == "eval" else "train"
        return tuple(i for i, s in enumerate(self.template_splits) if s == want)

    def description_count(self) -> int:
        """Fillings per (template, assignment) times template count."""
        return len(self.templates) * 27


@dataclass(frozen=True)
class TemplateCorpus:
    rtfm: RtfmTemplates
    messenger: MessengerCorpus


def _read_data(name: str) -> str:
    return resources.files("magrid.data").joinpath(name).read_text(encoding="utf-8")


def _validate_messenger(corpus: MessengerCorpus) -> None:
    if len(corpus.templates) != 82:
        raise GenerationError(f"expected 82 messenger templates, found {len(corpus.templates)}")
    for i, text in enumerate(corpus.templates):
        for blank in ("{entity}", "{role}", "{adjective}"):
            if text.count(blank) != 1:
                raise GenerationError(f"messenger template {i} malformed: {text!r}")
    if len(corpus.entity_synonyms) != 12:
        raise GenerationError("expected 12 messenger entities")
    for table in (corpus.entity_synonyms, corpus.role_synonyms, corpus.role_adjectives):
        for key, syns in table.items():
            if len(syns) != 3:
                raise GenerationError(f"expected 3 synonyms for {key!r}")
    if set(corpus.role_synonyms) != set(MESSENGER_ROLES):
        raise GenerationError("messenger role table mismatch")
    if corpus.description_count() != 2214:
        raise GenerationError("messenger corpus must yield 2214 descriptions")


@lru_cache(maxsize=1)
def load_corpus() -> TemplateCorpus:
    goal: dict[int, str] = {}
    team: dict[int, str] = {}
    mod: dict[int, str] = {}
    for line in _read_data("corpus_rtfm.txt").splitlines():
        if not line or line.startswith("#"):
            continue
        kind, idx, _split, text = line.split("\t", 3)
        {"goal": goal, "team": team, "mod": mod}[kind][int(idx)] = text
    rtfm = RtfmTemplates(
        goal=tuple(goal[i] for i in sorted(goal)),
        team=tuple(team[i] for i in sorted(team)),
        modifier=tuple(mod[i] for i in sorted(mod)),
    )
    if (len(rtfm.goal), len(rtfm.team), len(rtfm.modifier)) != (12, 10, 10):
        raise GenerationError(
            "expected 12/10/10 rtfm templates, found "
            f"{len(rtfm.goal)}/{len(rtfm.team)}/{len(rtfm.modifier)}"
        )

    templates: dict[int, str] = {}
    template_splits: dict[int, str] = {}
    entity_syn: dict[str, tuple[str, str, str]] = {}
    role_syn: dict[str, tuple[str, str, str]] = {}
    role_adj: dict[str, tuple[str, str, str]] = {}
    for line in _read_data("corpus_messenger.txt").splitlines():
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if fields[0] == "template":
            templates[int(fields[1])] = fields[3]
            template_splits[int(fields[1])] = fields[2]
        elif fields[0] == "entity":
            entity_syn[fields[1]] = tuple(fields[2:5])
        elif fields[0] == "role":
            role_syn[fields[1]] = tuple(fields[2:5])
        elif fields[0] == "adjective":
            role_adj[fields[1]] = tuple(fields[2:5])
        else:
            raise GenerationError(f"unknown corpus record kind {fields[0]!r}")
    messenger = MessengerCorpus(
        templates=tuple(templates[i] for i in sorted(templates)),
        template_splits=tuple(template_splits[i] for i in sorted(template_splits)),
        entity_synonyms=entity_syn,
        role_synonyms=role_syn,
        role_adjectives=role_adj,
    )
    _validate_messenger(messenger)
    return TemplateCorpus(rtfm=rtfm, messenger=messenger)


# --- splits -----------------------------------------------------------------

Quad = tuple[str, str, str, str]  # (monster, team, modifier, element)


def _hash_unit(salt: int, *parts: str) -> float:
    raw = f"{salt}|" + "|".join(parts)
    h = hashlib.sha256(raw.encode("utf-8")).digest()
    return int.from_bytes(h[:8], "little") / 2**64


@dataclass(frozen=True)
class SplitSpec:
    """Deterministic partition of the assignment space.

    RTFM: every (monster, team, modifier, element) quadruple is assigned to
    exactly one of train/eval; eval_new is the full quadruple space over the
    held-out word lists, disjoint from both by vocabulary.  MESSENGER:
    (entity, role) combinations are partitioned per entity, and description
    templates carry a fixed train/eval tag in the corpus.
    """

    salt: int
    rtfm_train: frozenset[Quad]
    rtfm_eval: frozenset[Quad]
    rtfm_eval_new: frozenset[Quad]
    messenger_train_combos: frozenset[tuple[str, str]]
    messenger_eval_combos: frozenset[tuple[str, str]]
    messenger_train_templates: tuple[int, ...]
    messenger_eval_templates: tuple[int, ...]

    def rtfm_quads(self, split: str) -> frozenset[Quad]:
        return {
            "train": self.rtfm_train,
            "eval": self.rtfm_eval,
            "eval_new": self.rtfm_eval_new,
        }[split]

    def messenger_combos(self, split: str) -> frozenset[tuple[str, str]]:
        if split == "train":
            return self.messenger_train_combos
        if split == "eval":
            return self.messenger_eval_combos
        raise ValueError(f"messenger has no split {split!r}")

    def digest(self) -> str:
        parts = [str(self.salt)]
        for quads in (self.rtfm_train, self.rtfm_eval, self.rtfm_eval_new):
            parts.append(";".join("|".join(q) for q in sorted(quads)))
        for combos in (self.messenger_train_combos, self.messenger_eval_combos):
            parts.append(";".join("|".join(c) for c in sorted(combos)))
        parts.append(",".join(map(str, self.messenger_train_templates)))
        parts.append(",".join(map(str, self.messenger_eval_templates)))
        return digest_of("\n".join(parts))


def make_splits(rng: Rng) -> SplitSpec:
    """Partition assignments deterministically from the stream's seed."""
    corpus = load_corpus()
    salt = rng.split("splits").integers(2**31)

    train: set[Quad] = set()
    ev: set[Quad] = set()
    for monster in RTFM_MONSTERS:
        for team_name in RTFM_TEAMS:
            for modifier in RTFM_MODIFIERS:
                for element in RTFM_ELEMENTS:
                    quad = (monster, team_name, modifier, element)
                    if _hash_unit(salt, *quad) < TRAIN_FRACTION:
                        train.add(quad)
                    else:
                        ev.add(quad)
    eval_new = {
        (m, t, mo, e)
        for m in RTFM_NEW_MONSTERS
        for t in RTFM_TEAMS
        for mo in RTFM_NEW_MODIFIERS
        for e in RTFM_ELEMENTS
    }
    if not train or not ev:
        raise GenerationError("rtfm assignment partition degenerate")

    entities = corpus.messenger.entities
    train_combos: set[tuple[str, str]] = set()
    eval_combos: set[tuple[str, str]] = set()
    for i, entity in enumerate(entities):
        held_out = MESSENGER_ROLES[(i + salt) % 3]
        for role in MESSENGER_ROLES:
            (eval_combos if role == held_out else train_combos).add((entity, role))
    for combos, tag in ((train_combos, "train"), (eval_combos, "eval")):
        for role in MESSENGER_ROLES:
            need = 2 if role != "enemy" else 1
            have = sum(1 for _, r in combos if r == role)
            if have < need:
                raise GenerationError(f"messenger {tag} split cannot place enough {role} entities")

    return SplitSpec(
        salt=salt,
        rtfm_train=frozenset(train),
        rtfm_eval=frozenset(ev),
        rtfm_eval_new=frozenset(eval_new),
        messenger_train_combos=frozenset(train_combos),
        messenger_eval_combos=frozenset(eval_combos),
        messenger_train_templates=corpus.messenger.template_ids("train"),
        messenger_eval_templates=corpus.messenger.template_ids("eval"),
    )


@lru_cache(maxsize=1)
def default_splits() -> SplitSpec:
    return make_splits(Rng(DEFAULT_SPLIT_SEED))


# --- manuals ----------------------------------------------------------------


@dataclass(frozen=True)
class Sentence:
    text: str
    kind: str  # goal | team | mod | description
    template_id: int
    fillers: tuple[str, ...]


@dataclass
class Manual:
    sentences: list[Sentence] = field(default_factory=list)
    goal: Sentence | None = None

    @property
    def document(self) -> list[str]:
        return [s.text for s in self.sentences]

    @property
    def goal_text(self) -> str:
        return self.goal.text if self.goal else ""


def rtfm_vocab_words(split: str) -> dict[str, tuple[str, ...]]:
    if split in ("train", "eval"):
        return {
            "monsters": RTFM_MONSTERS,
            "weapons": RTFM_WEAPONS,
            "modifiers": RTFM_MODIFIERS,
            "elements": RTFM_ELEMENTS,
            "teams": RTFM_TEAMS,
        }
    if split == "eval_new":
        return {
            "monsters": RTFM_NEW_MONSTERS,
            "weapons": RTFM_NEW_WEAPONS,
            "modifiers": RTFM_NEW_MODIFIERS,
            "elements": RTFM_ELEMENTS,
            "teams": RTFM_TEAMS,
        }
    raise ValueError(f"unknown rtfm split {split!r}")


def _check_rtfm_words(assignment, split: str) -> None:
    words = rtfm_vocab_words(split)
    for monster, team_name in assignment.team_facts:
        if monster not in words["monsters"] or team_name not in words["teams"]:
            raise GenerationError(f"out-of-vocabulary team fact ({monster}, {team_name})")
    for modifier, element in assignment.modifier_facts:
        if modifier not in words["modifiers"] or element not in words["elements"]:
            raise GenerationError(f"out-of-vocabulary modifier fact ({modifier}, {element})")


def render_rtfm_manual(assignment, stage: str, rng: Rng, split: str = "train") -> Manual:
    """Render the document for one assignment.

    Below S5 every fact uses the canonical statement form (template 0); S5
    samples a template per statement.  Statement order is shuffled either way.
    """
    corpus = load_corpus().rtfm
    _check_rtfm_words(assignment, split)
    templated = stage == "S5"
    pick = rng.split("templates")

    def choose(templates: tuple[str, ...]) -> int:
        return pick.integers(len(templates)) if templated else 0

    sentences: list[Sentence] = []
    for monster, team_name in assignment.team_facts:
        tid = choose(corpus.team)
        sentences.append(
            Sentence(
                text=corpus.team[tid].format(monster=monster, team=team_name),
                kind="team",
                template_id=tid,
                fillers=(monster, team_name),
            )
        )
    for modifier, element in assignment.modifier_facts:
        tid = choose(corpus.modifier)
        sentences.append(
            Sentence(
                text=corpus.modifier[tid].format(modifier=modifier, element=element),
                kind="mod",
                template_id=tid,
                fillers=(modifier, element),
            )
        )
    gid = choose(corpus.goal)
    goal = Sentence(
        text=corpus.goal[gid].format(team=assignment.target_team),
        kind="goal",
        template_id=gid,
        fillers=(assignment.target_team,),
    )
    return Manual(sentences=rng.split("shuffle").shuffled(sentences), goal=goal)


def render_messenger_manual(role_assignment, rng: Rng, split: str = "train") -> Manual:
    """One description sentence per placed entity, plus the fixed goal line.

    Each description is a corpus template filled with an (entity synonym,
    role synonym, role adjective) triple, then extended with the entity's
    movement phrase.  Split selects both the template pool and which
    (entity, role) combinations are allowed.
    """
    corpus = load_corpus().messenger
    spec = default_splits()
    allowed_templates = (
        spec.messenger_eval_templates if split == "eval" else spec.messenger_train_templates
    )
    combos = spec.messenger_combos(split)
    pick = rng.split("templates")
    sentences: list[Sentence] = []
    for entity_name, role in role_assignment.roles:
        if (entity_name, role) not in combos:
            raise GenerationError(f"combination {(entity_name, role)} not allowed in {split}")
        movement = role_assignment.movement_of(entity_name)
        tid = allowed_templates[pick.integers(len(allowed_templates))]
        ent_syn = pick.choice(corpus.entity_synonyms[entity_name])
        role_syn = pick.choice(corpus.role_synonyms[role])
        adj = pick.choice(corpus.role_adjectives[role])
        body = corpus.templates[tid].format(entity=ent_syn, role=role_syn, adjective=adj)
        text = body + " " + MESSENGER_MOVEMENT_PHRASES[movement]
        sentences.append(
            Sentence(
                text=text,
                kind="description",
                template_id=tid,
                fillers=(ent_syn, role_syn, adj, movement),
            )
        )
    goal = Sentence(text=MESSENGER_GOAL_SENTENCE, kind="goal", template_id=-1, fillers=())
    return Manual(sentences=rng.split("shuffle").shuffled(sentences), goal=goal)


def enumerate_fillings(template_id: int, entity: str, role: str) -> list[str]:
    """All surface forms of one template for one (entity, role) assignment."""
    corpus = load_corpus().messenger
    template = corpus.templates[template_id]
    return [
        template.format(entity=e, role=r, adjective=a)
        for e in corpus.entity_synonyms[entity]
        for r in corpus.role_synonyms[role]
        for a in corpus.role_adjectives[role]
    ]


def reconstruct_sentence(sentence: Sentence, env: str) -> str:
    """Rebuild a sentence's exact text from its provenance."""
    corpus = load_corpus()
    if env == "rtfm":
        if sentence.kind == "goal":
            return corpus.rtfm.goal[sentence.template_id].format(team=sentence.fillers[0])
        if sentence.kind == "team":
            monster, team_name = sentence.fillers
            return corpus.rtfm.team[sentence.template_id].format(monster=monster, team=team_name)
        if sentence.kind == "mod":
            modifier, element = sentence.fillers
            return corpus.rtfm.modifier[sentence.template_id].format(
                modifier=modifier, element=element
            )
        raise ValueError(f"unknown rtfm sentence kind {sentence.kind!r}")
    if env == "messenger":
        if sentence.kind == "goal":
            return MESSENGER_GOAL_SENTENCE
        ent_syn, role_syn, adj, movement = sentence.fillers
        body = corpus.messenger.templates[sentence.template_id].format(
            entity=ent_syn, role=role_syn, adjective=adj
        )
        return body + " " + MESSENGER_MOVEMENT_PHRASES[movement]
    raise ValueError(f"unknown env {env!r}")


# --- closed vocabularies for the decision core -------------------------------


def tokenize(text: str) -> list[str]:
    """Whitespace tokens with sentence punctuation stripped; the one
    tokenizer shared by vocabulary construction and featurization."""
    for ch in ".,:;!?":
        text = text.replace(ch, " ")
    return text.split()


def _words_of(text: str) -> list[str]:
    return tokenize(text)


def vocabulary(env: str, split: str, n_agents: int = 3) -> tuple[str, ...]:
    """Closed token vocabulary covering every observation and manual token
    the given (env, split) can produce, plus agent marker tokens."""
    corpus = load_corpus()
    words: set[str] = set()
    for i in range(n_agents):
        words.add(f"agent{i}")
        words.add(f"agent{i}m")
    if env == "rtfm":
        for group in rtfm_vocab_words(split).values():
            for term in group:
                words.update(_words_of(term))
        for templates in (corpus.rtfm.goal, corpus.rtfm.team, corpus.rtfm.modifier):
            for t in templates:
                words.update(w for w in _words_of(t) if "{" not in w)
    elif env == "messenger":
        for name in corpus.messenger.entities:
            words.add(f"sym{symbol_of(name)}")
        spec = default_splits()
        tids = spec.messenger_eval_templates if split == "eval" else spec.messenger_train_templates
        for tid in tids:
            t = corpus.messenger.templates[tid]
            words.update(w for w in _words_of(t) if "{" not in w)
        for table in (
            corpus.messenger.entity_synonyms,
            corpus.messenger.role_synonyms,
            corpus.messenger.role_adjectives,
        ):
            for syns in table.values():
                words.update(syns)
        for phrase in MESSENGER_MOVEMENT_PHRASES.values():
            words.update(_words_of(phrase))
        words.update(_words_of(MESSENGER_GOAL_SENTENCE))
    else:
        raise ValueError(f"unknown env {env!r}")
    return tuple(sorted(words))


def symbol_of(entity_name: str) -> int:
    """Fixed observation symbol of a messenger entity (1-based, stable)."""
    entities = load_corpus().messenger.entities
    return entities.index(entity_name) + 1
