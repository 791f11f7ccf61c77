"""Regenerate the committed demo fixtures under fixtures/.

Everything is drawn from a fixed seed so reruns produce identical bytes.
The corpus is synthetic Basque-flavoured text with planted URL duplicates,
cross-source copies, repeated paragraphs, and one document per quality
filter, so every pipeline stage has visible work to do.
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from corpuskit.documents import Document, write_documents

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

BASQUE_WORDS = (
    "etxe mendi itsaso lagun eguzki euri liburu hiri baso ibai zubi kale ogi "
    "ardo esne sagar txakur katu txori arrain harri lore zuhaitz belar elur "
    "haize izar ilargi gau egun goiz arrats aste hilabete urte ordu denbora "
    "hitz esaldi istorio kanta musika dantza jolas lan eskola irakasle ikasle "
    "haur handi txiki zahar berri eder garbi ilun argi hotz bero"
).split()
BASQUE_GLUE = (
    "da dira zen ziren dago daude du dute eta baina edo ere oso asko gutxi "
    "beti inoiz orain gero hemen han gaur bihar atzo dela baita"
).split()
ENGLISH_WORDS = (
    "the house mountain sea friend sun rain book city forest river bridge "
    "street bread wine milk apple dog cat bird fish stone flower tree grass "
    "snow wind star moon night day morning evening week month year hour time "
    "word sentence story song music dance game work school teacher student "
    "child is are was were and but or also very many few always never now "
    "later here there today tomorrow yesterday big small old new"
).split()


def sentence(rng: random.Random, words: list[str], glue: list[str]) -> str:
    n = rng.randint(6, 11)
    picked = []
    for i in range(n):
        pool = glue if glue and i % 3 == 2 else words
        picked.append(rng.choice(pool))
    picked[0] = picked[0].capitalize()
    return " ".join(picked) + "."


def paragraph(rng: random.Random, words: list[str], glue: list[str]) -> str:
    return " ".join(sentence(rng, words, glue) for _ in range(rng.randint(2, 4)))


def basque_paragraph(rng: random.Random) -> str:
    return paragraph(rng, BASQUE_WORDS, BASQUE_GLUE)


def messy(text: str, rng: random.Random) -> str:
    """Inject the raw-text defects the normalizer is there to remove."""
    roll = rng.random()
    if roll < 0.25:
        text = text.replace(" ", "  ", 3).replace(". ", ".\r\n", 1)
    elif roll < 0.45:
        text = "\n\n\n" + text.replace(" eta ", " eta\t", 1) + "\n"
    elif roll < 0.55:
        text = text.replace("a", "á", 1)  # combining accent, NFC recomposes
    return text


def curated_docs(rng: random.Random) -> list[Document]:
    docs = []
    for i in range(60):
        text = "\n".join(basque_paragraph(rng) for _ in range(rng.randint(1, 3)))
        docs.append(Document(id=f"cur-{i:03d}", source="curated", text=text))
    return docs


def web_docs(rng: random.Random, curated: list[Document]) -> list[Document]:
    docs = []
    for i in range(50):
        text = messy(basque_paragraph(rng), rng)
        docs.append(
            Document(
                id=f"web-{i:03d}",
                source="web",
                url=f"https://adibidea.eus/artikulua/{i}",
                text=text,
            )
        )

    # Copies of curated pages: the curated version has higher priority and
    # must be the one that survives.
    for j, k in enumerate(rng.sample(range(len(curated)), 8)):
        docs.append(
            Document(
                id=f"web-copy-{j}",
                source="web",
                url=f"https://adibidea.eus/kopia/{j}",
                text=curated[k].text.upper() if j % 2 else curated[k].text,
            )
        )

    # Same page fetched twice under cosmetically different URLs.
    for j in range(4):
        docs.append(
            Document(
                id=f"web-urldup-{j}",
                source="web",
                url=f"HTTPS://Adibidea.EUS/artikulua/{j}#zatia",
                text=basque_paragraph(rng),
            )
        )

    low_quality = [
        ("web-bad-english", "The quick brown fox jumps over the lazy dog near the old stone bridge today.", None),
        ("web-bad-short", "hitz gutxi hemen", None),
        ("web-bad-shortwords", "aa bb cc dd ee ff gg hh ii jj kk ll", None),
        ("web-bad-longwords", "kontzeptualizazioarentzako berrinterpretazioarekin desinstituzionalizazioa internazionalizazioaren konstituzionaltasunaren", None),
        ("web-bad-numeric", "12 34 567 89 01 234 56 78 90 123 45 67", None),
        ("web-bad-symbols", "atala # bat # bi # hiru # lau # bost laburpena", None),
        ("web-bad-ellipsis", "lehenengo zatia...\nbigarren zatia...\nhirugarren zatia...\nlaugarrena hemen dago oso ondo idatzita", None),
        ("web-bad-bullets", "- lehena\n- bigarrena\n- hirugarrena\n- laugarrena\n- bosgarrena\n- seigarrena\n- zazpigarrena\n- zortzigarrena\n- bederatzigarrena\n- hamargarrena", None),
        ("web-bad-lorem", "Lorem ipsum dolor sit amet consectetur adipiscing elit sed do eiusmod tempor incididunt.", None),
        ("web-bad-code", "funtzioa() { itzuli balioa; } beste kode zati bat hemen dago oraindik luzeagoa", None),
    ]
    for doc_id, text, url in low_quality:
        docs.append(Document(id=doc_id, source="web", url=url, text=text))
    rng.shuffle(docs)
    return docs


def crawl_docs(rng: random.Random, curated: list[Document]) -> list[Document]:
    shared = [basque_paragraph(rng) for _ in range(6)]
    docs = []
    for i in range(30):
        own = [basque_paragraph(rng) for _ in range(rng.randint(2, 4))]
        if i % 3 == 0:
            # Boilerplate paragraphs repeated across pages; the paragraph
            # pass should strip them while keeping the rest of the page.
            own.insert(0, shared[i % len(shared)])
        docs.append(Document(id=f"crawl-{i:03d}", source="crawl", text="\n".join(own)))

    # Whole pages that only consist of already-seen material.
    for j in range(3):
        docs.append(
            Document(id=f"crawl-dup-{j}", source="crawl", text=curated[j].text)
        )
    return docs


TASK_ITEMS = [
    {"question": "Zer da sagarra?", "choices": ["fruitu bat", "animalia bat", "harri bat"], "gold": 0, "category": "jakintza"},
    {"question": "Non bizi da arraina?", "choices": ["basoan", "itsasoan", "mendian"], "gold": 1, "category": "natura"},
    {"question": "Zer egiten du txoriak?", "choices": ["igeri", "hegan", "korrika"], "gold": 1, "category": "natura"},
    {"question": "Zein da esnearen kolorea?", "choices": ["zuria", "beltza", "gorria"], "gold": 0, "category": "jakintza"},
    {"question": "Noiz ateratzen da ilargia?", "choices": ["goizean", "eguerdian", "gauean"], "gold": 2, "category": "natura"},
    {"question": "Zer irakurtzen da liburutegian?", "choices": ["liburuak", "harriak", "sagarrak"], "gold": 0, "category": "jakintza"},
]
TASK_SHOTS = [
    {"question": "Zer da txakurra?", "choices": ["animalia bat", "lore bat", "ibai bat"], "gold": 0},
    {"question": "Non dago elurra?", "choices": ["itsasoan", "mendian", "kalean"], "gold": 1},
    {"question": "Zer edaten da goizean?", "choices": ["harria", "esnea", "belarra"], "gold": 1},
]

TASK_YAML = """\
name: galderak-demo
template:
  item_format: "Galdera: {question}\\n{choices}\\nErantzuna:{answer}"
  answer_mode: label
n_shots: 2
metric: accuracy
items: task_items.jsonl
shot_pool: task_shots.jsonl
"""

CONFIG_YAML = """\
# Demo run over the bundled synthetic corpus. All paths are relative to
# this file. See the README for a walkthrough of every section.

seed: 20240601
error_policy: abort

sources:
  - name: curated          # books and edited prose, most trusted
    priority: 1
    path: curated.jsonl
  - name: web              # news portals, has URLs and near-copies
    priority: 2
    path: web.jsonl.gz
  - name: crawl            # broad crawl with boilerplate paragraphs
    priority: 3
    path: crawl.jsonl
    paragraph_dedup: true

dedup:
  expected_docs: 10000     # sizing hint for the membership filters
  target_fpr: 1.0e-6
  paragraphs_per_doc: 8
  min_paragraphs: 1

filter:
  langid:
    kind: trigram
    target: seed_target.txt
    other: seed_other.txt
  quality:
    kind: heuristic
  # thresholds: {}         # defaults; override individual keys here

split:
  test_fraction: 0.01
  dev_fraction: 0.01

stats:
  token_vocab: vocab.txt

contamination:
  max_n: 16
  backend: exact
  stage: train             # audit benchmarks against the train split
  stopwords: stopwords.txt

evaluate:
  tasks:
    - task_galderak.yaml
  scorer:
    kind: char-ngram
    train: scorer_train.txt
    order: 3
  length_normalize: false

carbon:
  ledger: carbon_ledger.json
"""

STOPWORDS = ["eta", "da", "dira", "du", "dute", "ere", "edo", "baina"]

CARBON_LEDGER = [
    {"label": "7B", "gpu_hours": 952.53},
    {"label": "13B", "gpu_hours": 2518.0},
    {"label": "70B", "gpu_hours": 30266.0},
]


def write_jsonl(path: Path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")


def main() -> None:
    rng = random.Random(987654321)
    FIXTURES.mkdir(exist_ok=True)

    curated = curated_docs(rng)
    web = web_docs(rng, curated)
    crawl = crawl_docs(rng, curated)
    write_documents(curated, FIXTURES / "curated.jsonl")
    write_documents(web, FIXTURES / "web.jsonl.gz")
    write_documents(crawl, FIXTURES / "crawl.jsonl")

    # Contamination plant: two benchmark questions leak into curated docs as
    # full quiz lines (question plus all options) so the audit finds them.
    def quiz_line(item: dict) -> str:
        return item["question"] + " " + " ".join(item["choices"])

    planted = [
        Document(
            id="cur-planted-0",
            source="curated",
            text=basque_paragraph(rng) + "\n" + quiz_line(TASK_ITEMS[0]) + " erantzun zuzena noski.",
        ),
        Document(
            id="cur-planted-1",
            source="curated",
            text=quiz_line(TASK_ITEMS[1]) + "\n" + basque_paragraph(rng),
        ),
    ]
    write_documents(curated + planted, FIXTURES / "curated.jsonl")

    seed_target = "\n".join(sentence(rng, BASQUE_WORDS, BASQUE_GLUE) for _ in range(120))
    seed_other = "\n".join(sentence(rng, ENGLISH_WORDS, []) for _ in range(120))
    (FIXTURES / "seed_target.txt").write_text(seed_target + "\n", encoding="utf-8")
    (FIXTURES / "seed_other.txt").write_text(seed_other + "\n", encoding="utf-8")

    # Scorer training text: generic prose plus the exact shot/answer shapes
    # so the tiny character model has usable statistics.
    scorer_lines = [sentence(rng, BASQUE_WORDS, BASQUE_GLUE) for _ in range(60)]
    for row in TASK_SHOTS + TASK_ITEMS:
        scorer_lines.append(
            "Galdera: " + row["question"] + " Erantzuna: " + row["choices"][row["gold"]]
        )
    (FIXTURES / "scorer_train.txt").write_text("\n".join(scorer_lines) + "\n", encoding="utf-8")

    vocab = sorted(set(BASQUE_WORDS + BASQUE_GLUE + ["ak", "en", "ko", "tik", "ra", "an"]))
    (FIXTURES / "vocab.txt").write_text("\n".join(vocab) + "\n", encoding="utf-8")
    (FIXTURES / "stopwords.txt").write_text("\n".join(STOPWORDS) + "\n", encoding="utf-8")

    write_jsonl(FIXTURES / "task_items.jsonl", TASK_ITEMS)
    write_jsonl(FIXTURES / "task_shots.jsonl", TASK_SHOTS)
    (FIXTURES / "task_galderak.yaml").write_text(TASK_YAML, encoding="utf-8")
    (FIXTURES / "carbon_ledger.json").write_text(
        json.dumps(CARBON_LEDGER, indent=2) + "\n", encoding="utf-8"
    )
    (FIXTURES / "config.yaml").write_text(CONFIG_YAML, encoding="utf-8")
    print(f"wrote fixtures to {FIXTURES}")


if __name__ == "__main__":
    main()
