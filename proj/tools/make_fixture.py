#!/usr/bin/env python3
"""Regenerates data/fixtures/covid_tweets_1000.csv and data/fixtures/cases.jsonl.

The corpus uses the 13-column schema of the public COVID-19 tweets dump.
Texts mix causal statements (built from a fixed fact list with the verbs of
the shipped relation lexicon) with noise: URLs, hashtags, emoji, HTML
fragments, mentions and contractions. Output is a pure function of SEED.
"""

import csv
import json
import random
import sys
from datetime import datetime, timedelta
from pathlib import Path

SEED = 20200724
N_TWEETS = 1000

COLUMNS = [
    "user_name", "user_location", "user_description", "user_created", "user_followers",
    "user_friends", "user_favourites", "user_verified", "date", "text", "hashtags",
    "source", "is_retweet",
]

# (cause, verb, effect); "due to" facts are written effect-first.
FACTS = [
    ("Lockdown measures", "led to", "isolation"),
    ("Isolation", "increased", "awareness of immediate surroundings"),
    ("COVID-19", "caused", "appreciation for simple things"),
    ("The pandemic", "restricted", "activities"),
    ("Activities restricted", "led to", "more time at home"),
    ("Misinformation about masks", "caused", "incorrect mask usage"),
    ("Conflicting mask guidance", "led to", "mask misuse"),
    ("Panic buying", "caused", "empty supermarket shelves"),
    ("Fear of shortages", "resulted in", "panic buying"),
    ("School closures", "increased", "pressure on working parents"),
    ("Remote work", "led to", "longer screen time"),
    ("Job losses", "caused", "financial anxiety"),
    ("Travel bans", "restricted", "family visits"),
    ("Hospital overcrowding", "resulted in", "postponed surgeries"),
    ("Social distancing", "increased", "loneliness among the elderly"),
    ("Vaccine news", "increased", "hope for reopening"),
    ("Rising case numbers", "led to", "new lockdown measures"),
    ("Closed gyms", "led to", "home workouts"),
    ("Online classes", "caused", "student fatigue"),
    ("Curfews", "restricted", "night shifts"),
    ("Delivery demand", "increased", "courier workloads"),
    ("Quarantine rules", "caused", "missed family events"),
    ("Stock market swings", "resulted in", "retirement worries"),
    ("Testing delays", "led to", "undetected infections"),
    ("Mask shortages", "caused", "homemade face coverings"),
]

DUE_TO = [
    ("Empty streets", "lockdown measures"),
    ("Anxiety", "constant pandemic news"),
    ("Long queues", "capacity limits in shops"),
    ("Cancelled concerts", "gathering bans"),
    ("Business closures", "falling customer numbers"),
]

PAPER_SENTENCES = [
    "the one gift covid19 has given me is an appreciation for the simple things that were always around me.",
    "people felt isolated due to lockdown measures, which led to a heightened awareness of their immediate surroundings.",
    "during the pandemic, many activities were restricted, causing individuals to spend more time at home.",
    "The misinformation about COVID-19 and mask usage caused people to wear masks incorrectly.",
]

NOISE = [
    "Stay safe everyone and wash your hands",
    "Day 45 of working from the kitchen table",
    "New numbers out today, please read carefully",
    "Thank you to every nurse and doctor out there",
    "Anyone else baking bread again this week",
    "Cases are going up in my county again",
    "Our team delivered food parcels this morning",
    "Wear a mask, keep your distance, be kind",
    "Live update on the press conference tonight",
    "Grateful for my neighbours checking in on me",
]

PREFIXES = ["", "", "", "Honestly, ", "So true: ", "Reminder: ", "I think ", "Wow. ", "<b>Breaking</b> "]
SUFFIXES = ["", "", " #COVID19", " #coronavirus #StayHome", " https://t.co/{code}", " \U0001F637",
            " \U0001F622\U0001F64F", " via @newsdesk", " www.example.org/{code}", " &amp; more"]
CONTRACTION_FRAMES = ["I can't believe {x}", "It's clear that {x}", "We don't talk enough about how {x}",
                      "They're right, {x}", "{x}. Isn't it obvious?"]
HASHTAG_POOL = ["COVID19", "coronavirus", "StayHome", "Lockdown", "Masks", "Pandemic"]
SOURCES = ["Twitter for Android", "Twitter for iPhone", "Twitter Web App"]
LOCATIONS = ["", "London, England", "New Delhi, India", "Toronto, Canada", "Texas, USA", "Lagos, Nigeria"]


def sentence_for(rng):
    roll = rng.random()
    if roll < 0.7:
        cause, verb, effect = rng.choice(FACTS)
        body = f"{cause} {verb} {effect}"
    elif roll < 0.8:
        effect, cause = rng.choice(DUE_TO)
        body = f"{effect} due to {cause}"
    else:
        body = rng.choice(NOISE)
    if rng.random() < 0.2:
        body = rng.choice(CONTRACTION_FRAMES).format(x=body[0].lower() + body[1:])
    code = "".join(rng.choice("abcdefghijkmnpqrstuvwxyz0123456789") for _ in range(10))
    return rng.choice(PREFIXES) + body + rng.choice(SUFFIXES).format(code=code)


def main(out_dir):
    rng = random.Random(SEED)
    start = datetime(2020, 7, 24, 23, 47, 8)
    rows = []
    paper_slots = {100: 0, 250: 1, 400: 2, 700: 3}
    stamp = start
    for i in range(N_TWEETS):
        stamp += timedelta(seconds=rng.randint(30, 3600))
        text = PAPER_SENTENCES[paper_slots[i]] if i in paper_slots else sentence_for(rng)
        tags = [t for t in HASHTAG_POOL if f"#{t}" in text]
        rows.append({
            "user_name": f"user{rng.randint(1, 400)}",
            "user_location": rng.choice(LOCATIONS),
            "user_description": rng.choice(["", "Opinions are my own.", "News, health, life", "Dad, runner"]),
            "user_created": (datetime(2012, 1, 1) + timedelta(days=rng.randint(0, 3000))).strftime("%Y-%m-%d %H:%M:%S"),
            "user_followers": rng.randint(0, 50000),
            "user_friends": rng.randint(0, 5000),
            "user_favourites": rng.randint(0, 20000),
            "user_verified": rng.choice(["False", "False", "False", "True"]),
            "date": stamp.strftime("%Y-%m-%d %H:%M:%S"),
            "text": text,
            "hashtags": json.dumps(tags).replace('"', "'") if tags else "",
            "source": rng.choice(SOURCES),
            "is_retweet": "False",
        })
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "covid_tweets_1000.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)

    cases = [
        ("c01", "What caused people to appreciate simple things around them during the COVID-19 pandemic?",
         "Lockdown measures led to isolation, which increased awareness of immediate surroundings and appreciation for simple things."),
        ("c02", "What led to people wearing masks incorrectly during the COVID-19 pandemic?",
         "The misinformation about COVID-19 and mask usage caused people to wear masks incorrectly."),
        ("c03", "What caused empty supermarket shelves?",
         "Fear of shortages resulted in panic buying, which caused empty supermarket shelves."),
        ("c04", "What caused financial anxiety during the pandemic?",
         "Job losses caused financial anxiety."),
        ("c05", "What led to more time at home?",
         "The pandemic restricted activities, and restricted activities led to more time at home."),
        ("c06", "What caused postponed surgeries?",
         "Hospital overcrowding resulted in postponed surgeries."),
        ("c07", "What increased loneliness among the elderly?",
         "Social distancing increased loneliness among the elderly."),
        ("c08", "What caused student fatigue?",
         "Online classes caused student fatigue."),
        ("c09", "What led to undetected infections?",
         "Testing delays led to undetected infections."),
        ("c10", "What caused homemade face coverings?",
         "Mask shortages caused homemade face coverings."),
    ]
    with open(out_dir / "cases.jsonl", "w", encoding="utf-8") as f:
        for qid, query, truth in cases:
            f.write(json.dumps({"qid": qid, "query": query, "truth": truth}) + "\n")


if __name__ == "__main__":
    root = Path(__file__).resolve().parent.parent
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else root / "data" / "fixtures")
