"""Regenerate the frozen template corpus files under src/magrid/data/.

The corpus is procedurally authored: sentence skeletons with blank markers,
written once and committed so episode generation never depends on this
script. Counts are load-bearing (the loader asserts them), so edit the lists
here and re-run rather than editing the data files by hand.
"""

from __future__ import annotations

import pathlib

DATA_DIR = pathlib.Path(__file__).resolve().parent.parent / "src" / "magrid" / "data"

RTFM_GOAL_TEMPLATES = [
    "defeat {team}.",
    "your mission is to defeat {team}.",
    "eliminate every monster allied with {team}.",
    "wipe out the forces of {team}.",
    "hunt down all members of {team}.",
    "the monsters to slay belong to {team}.",
    "bring down {team} and all who serve it.",
    "victory requires the fall of {team}.",
    "seek out and destroy {team}.",
    "no monster of {team} may survive.",
    "rid this place of {team}.",
    "the followers of {team} must be defeated.",
]

RTFM_TEAM_TEMPLATES = [
    "{monster} belongs to {team}.",
    "the {monster} fights for {team}.",
    "{team} counts the {monster} among its ranks.",
    "you will find the {monster} serving {team}.",
    "the {monster} is sworn to {team}.",
    "{team} commands the {monster}.",
    "a {monster} marches under the banner of {team}.",
    "the {monster} answers to {team}.",
    "among the followers of {team} is the {monster}.",
    "{team} claims the {monster} as one of its own.",
]

RTFM_MOD_TEMPLATES = [
    "{modifier} beats {element}.",
    "{modifier} weapons are effective against {element}.",
    "use a {modifier} item to overcome {element}.",
    "{element} falls to anything {modifier}.",
    "arms that are {modifier} cut through {element}.",
    "{modifier} gear is the bane of {element}.",
    "against {element}, carry something {modifier}.",
    "the {modifier} kind defeats the {element} kind.",
    "{element} monsters are weak to {modifier} weapons.",
    "nothing resists a {modifier} weapon like {element} does.",
]

MESSENGER_BASE_FRAMES = [
    "the {adjective} {entity} is the {role}.",
    "the {entity} you can see is the {adjective} {role}.",
    "treat the {entity} as the {adjective} {role}.",
    "the {entity} plays the part of the {adjective} {role}.",
    "consider the {entity} to be the {adjective} {role}.",
    "in this game the {entity} acts as the {adjective} {role}.",
    "the {entity} stands for the {adjective} {role}.",
    "the {entity} here serves as the {adjective} {role}.",
    "you should know the {entity} is the {adjective} {role}.",
    "remember that the {entity} is the {adjective} {role}.",
    "this round casts the {entity} as the {adjective} {role}.",
    "the {entity} on the board is the {adjective} {role}.",
    "whatever happens, the {entity} remains the {adjective} {role}.",
    "the {entity} turns out to be the {adjective} {role}.",
    "our scouts say the {entity} is the {adjective} {role}.",
    "word is the {entity} is the {adjective} {role}.",
    "it appears the {entity} is the {adjective} {role}.",
    "make no mistake, the {entity} is the {adjective} {role}.",
    "for this task the {entity} takes the role of the {adjective} {role}.",
    "the {entity} was chosen to be the {adjective} {role}.",
    "identify the {entity} as the {adjective} {role}.",
    "the {role} that is {adjective} appears as the {entity}.",
    "the {adjective} {role} takes the form of the {entity}.",
    "the {adjective} {role} is disguised as the {entity}.",
    "the {adjective} {role} moves about as the {entity}.",
    "look for the {entity} if you seek the {adjective} {role}.",
    "to find the {adjective} {role}, look for the {entity}.",
    "the {adjective} {role} shows up on the grid as the {entity}.",
]

MESSENGER_PREFIXES = ["", "note: ", "heads up: "]
MESSENGER_TEMPLATE_COUNT = 82
MESSENGER_EVAL_TEMPLATE_COUNT = 16

MESSENGER_ENTITY_SYNONYMS = {
    "falcon": ("falcon", "hawk", "raptor"),
    "wagon": ("wagon", "cart", "carriage"),
    "lantern": ("lantern", "lamp", "beacon"),
    "serpent": ("serpent", "snake", "viper"),
    "golem": ("golem", "statue", "colossus"),
    "pirate": ("pirate", "corsair", "buccaneer"),
    "comet": ("comet", "meteor", "meteorite"),
    "turtle": ("turtle", "tortoise", "terrapin"),
    "wizard": ("wizard", "sorcerer", "conjurer"),
    "engine": ("engine", "motor", "locomotive"),
    "jester": ("jester", "clown", "trickster"),
    "crab": ("crab", "crayfish", "crustacean"),
}

MESSENGER_ROLE_SYNONYMS = {
    "enemy": ("enemy", "opponent", "adversary"),
    "message": ("message", "memo", "report"),
    "goal": ("goal", "target", "aim"),
}

MESSENGER_ROLE_ADJECTIVES = {
    "enemy": ("dangerous", "deadly", "lethal"),
    "message": ("restricted", "classified", "secret"),
    "goal": ("crucial", "vital", "essential"),
}


def messenger_templates() -> list[str]:
    out = []
    for prefix in MESSENGER_PREFIXES:
        for frame in MESSENGER_BASE_FRAMES:
            out.append(prefix + frame)
    seen = set()
    deduped = []
    for t in out:
        if t not in seen:
            seen.add(t)
            deduped.append(t)
    return deduped[:MESSENGER_TEMPLATE_COUNT]


def write_rtfm() -> None:
    lines = ["# magrid rtfm manual templates: kind<TAB>id<TAB>split<TAB>text"]
    for kind, templates in (
        ("goal", RTFM_GOAL_TEMPLATES),
        ("team", RTFM_TEAM_TEMPLATES),
        ("mod", RTFM_MOD_TEMPLATES),
    ):
        for i, text in enumerate(templates):
            lines.append(f"{kind}\t{i}\tall\t{text}")
    (DATA_DIR / "corpus_rtfm.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_messenger() -> None:
    templates = messenger_templates()
    assert len(templates) == MESSENGER_TEMPLATE_COUNT, len(templates)
    lines = [
        "# magrid messenger corpus",
        "# template<TAB>id<TAB>split<TAB>text  (blanks: {entity} {role} {adjective})",
        "# entity<TAB>name<TAB>syn1<TAB>syn2<TAB>syn3 ; role/adjective likewise",
    ]
    n_eval = MESSENGER_EVAL_TEMPLATE_COUNT
    for i, text in enumerate(templates):
        split = "eval" if i >= len(templates) - n_eval else "train"
        lines.append(f"template\t{i}\t{split}\t{text}")
    for name, syns in MESSENGER_ENTITY_SYNONYMS.items():
        lines.append("entity\t" + name + "\t" + "\t".join(syns))
    for role, syns in MESSENGER_ROLE_SYNONYMS.items():
        lines.append("role\t" + role + "\t" + "\t".join(syns))
    for role, adjs in MESSENGER_ROLE_ADJECTIVES.items():
        lines.append("adjective\t" + role + "\t" + "\t".join(adjs))
    (DATA_DIR / "corpus_messenger.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    write_rtfm()
    write_messenger()
    print(f"wrote corpus files to {DATA_DIR}")
