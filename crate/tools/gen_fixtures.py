#!/usr/bin/env python3
"""Writes the simulated-site fixture corpus under crates/core/fixtures.

Three sites, three task families each (one clean, one reasoning flaw, one
interaction flaw), four tasks per family. Re-running rewrites the files
byte-for-byte.
"""

import json
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "crates" / "core" / "fixtures"


def el(key, tag, id=None, text=None, label=None, attrs=None, classes=None, children=None, hidden=False, modal=False):
    node = {"key": key, "tag": tag}
    if id:
        node["id"] = id
    if classes:
        node["classes"] = classes
    if attrs:
        node["attrs"] = attrs
    if text is not None:
        node["text"] = text
    if label is not None:
        node["label"] = label
    if children:
        node["children"] = children
    if hidden:
        node["hidden"] = True
    if modal:
        node["modal"] = True
    return node


def page(url, title, children):
    return {"url": url, "title": title, "root": el("body", "body", children=children)}


def slug(name):
    return "+".join(name.lower().split())


def wslug(name):
    return "-".join(name.lower().split())


def trans(url, action, element, effects, requires=None):
    t = {"url": url, "action": action, "element": element, "effects": effects}
    if requires:
        t["requires"] = requires
    return t


def rule(act, element=None, payload=None, **when):
    a = {"action": act}
    if element:
        a["element"] = element
    if payload is not None:
        a["payload"] = payload
    return {"when": when, "act": a}


def task(site, tid, ty, instruction, start, success, gold, gold_v2=None, answer=None, evidence=None,
         vars=None, label=None):
    t = {
        "task_id": f"{site}-{tid}",
        "site_id": site,
        "instruction": instruction,
        "task_type": ty,
        "start_url": start,
        "success": success,
        "gold": gold,
    }
    if gold_v2:
        t["gold_drift"] = {"2": gold_v2}
    if answer is not None:
        t["gold_answer"] = answer
    if evidence:
        t["evidence_url"] = evidence
    if vars:
        t["vars"] = vars
    if label:
        level = "err_reasoning" if label in REASONING else "err_interaction"
        t["failure_label"] = {"value": level, "mode": label}
    return t


REASONING = {"answer-omission", "insufficient-exploration", "task-misunderstanding", "false-no-data", "empty-answer"}


def shoplite():
    products = [
        (1, "Blue Mug", "$12.00", "$9.50"),
        (2, "Red Kettle", "$30.00", "$24.00"),
        (3, "Green Cup", "$8.00", "$6.25"),
        (4, "Steel Pan", "$45.00", "$39.99"),
        (5, "Oak Tray", "$22.00", "$18.00"),
        (6, "Glass Jar", "$7.00", "$5.75"),
    ]
    pages = [
        page("/", "ShopLite Home", [
            el("brand", "h1", text="ShopLite"),
            el("search-form", "form", id="search-form", children=[
                el("search-box", "input", id="search-box", label="Search products", attrs={"name": "q", "type": "text"}),
                el("search-btn", "button", id="search-btn", text="Search", attrs={"type": "submit"}),
            ]),
            el("featured", "ul", classes=["featured"], children=[
                el(f"feat-{n}", "a", classes=["featured-link"], text=name, attrs={"href": f"/product/{n}"})
                for n, name, _, _ in products[:3]
            ]),
        ]),
        page("/cart", "Your cart", [el("cart-note", "p", text="Item added to your cart")]),
    ]
    for n, name, listed, sale in products:
        pages.append(page(f"/search?q={slug(name)}", "Search results", [
            el("results-heading", "h1", text=f"Results for {name}"),
            el("results", "ul", classes=["results"], children=[
                el(f"row-{n}", "li", classes=["result"], children=[
                    el(f"result-{n}", "a", id=f"result-{n}", text=name, attrs={"href": f"/product/{n}"}),
                    el(f"result-{n}-price", "span", classes=["listing-price"], text=listed),
                ]),
            ]),
        ]))
        pages.append(page(f"/product/{n}", name, [
            el("product-title", "h1", text=name),
            el("price", "span", id="price", classes=["price"], text=sale),
            el("add-to-cart", "button", id="add-to-cart", text="Add to cart"),
            el("promo", "div", modal=True, children=[
                el("promo-text", "p", text="Join our newsletter for deals"),
                el("promo-close", "button", id="promo-close", text="No thanks"),
            ]),
        ]))
    site = {
        "site_id": "shoplite",
        "pages": pages,
        "transitions": [
            trans("/", "submit", "search-form", [{"effect": "navigate", "url": "/search?q={query:search-box}"}]),
            trans("/product/*", "click", "promo-close", [{"effect": "hide", "element": "promo"}]),
            trans("/product/*", "click", "add-to-cart", [
                {"effect": "set-state", "key": "cart_item", "value": "{url}"},
                {"effect": "navigate", "url": "/cart"},
            ]),
        ],
        "drift_versions": [
            {"version": 1, "rules": [
                {"rule": "set-classes", "page": "/", "element": "search-btn", "classes": ["btn", "btn-primary"]},
                {"rule": "set-classes", "page": "/product/*", "element": "price", "classes": ["price", "sale"]},
            ]},
            {"version": 2, "rules": [
                {"rule": "rename-id", "page": "/", "element": "search-box", "to": "q"},
                {"rule": "relabel", "page": "/", "element": "search-box", "label": "Find items"},
                {"rule": "rename-id", "page": "/product/*", "element": "add-to-cart", "to": "cart-add"},
            ]},
        ],
    }
    tasks = []
    for i, n in enumerate([1, 3, 5, 6]):
        name = products[n - 1][1]
        tasks.append(task("shoplite", f"search-{i + 1}", "search", f'Search the catalog for "{name}"', "/",
                          {"kind": "url-matches", "pattern": f"/search?q={slug(name)}"},
                          [f'type(#search-box, "{name}")', "submit(#search-form)", "stop()"],
                          [f'type(#q, "{name}")', "submit(#search-form)", "stop()"],
                          vars={"query": name}))
    for i, n in enumerate([2, 4, 6, 1]):
        _, name, _, sale = products[n - 1]
        tasks.append(task("shoplite", f"price-{i + 1}", "price-lookup", f'Find the current price of "{name}" in the catalog',
                          f"/search?q={slug(name)}", {"kind": "answer-equals", "value": sale},
                          [f"click(#result-{n})", f'answer("{sale}")'], answer=sale, evidence=f"/product/{n}",
                          vars={"pid": str(n)}, label="insufficient-exploration"))
    for i, n in enumerate([4, 2, 3, 5]):
        name = products[n - 1][1]
        tasks.append(task("shoplite", f"cart-{i + 1}", "add-to-cart", f'Add "{name}" to the cart', f"/product/{n}",
                          {"kind": "state-equals", "key": "cart_item", "value": f"/product/{n}"},
                          ["click(#promo-close)", "click(#add-to-cart)", "stop()"],
                          ["click(#promo-close)", "click(#cart-add)", "stop()"],
                          label="repeated-execution"))
    policy = {"site_id": "shoplite", "families": {
        "search": [
            rule("type", "search-box", "{var:query}", url="/", state={"search-box": ""}),
            rule("submit", "search-form", url="/"),
            rule("stop", url="/search?*"),
        ],
        # reads the listing price; the detail page shows the real one
        "price-lookup": [
            rule("click", "result-{var:pid}", url="/search?*", mode="insufficient-exploration"),
            rule("answer", payload="{read:result-{var:pid}-price}", url="/search?*"),
            rule("answer", payload="{read:price}", url="/product/*"),
        ],
        # keeps clicking through the promo modal
        "add-to-cart": [
            rule("stop", url="/cart"),
            rule("click", "add-to-cart", url="/product/*"),
        ],
    }}
    return site, tasks, policy


def wikilite():
    articles = [
        ("Ferris", "2015", "The crab mascot of a systems language."),
        ("Tux", "1996", "The penguin mascot of a kernel."),
        ("Gopher", "2009", "The rodent mascot of a compiled language."),
        ("Duke", "1995", "The mascot of a virtual machine platform."),
        ("Octocat", "2008", "The mascot of a code hosting service."),
        ("Wilber", "1998", "The mascot of an image editor."),
    ]
    pages = [
        page("/", "WikiLite", [
            el("wiki-brand", "h1", text="WikiLite"),
            el("wiki-search-form", "form", id="wiki-search-form", children=[
                el("wiki-search", "input", id="wiki-search", label="Search articles", attrs={"name": "q", "type": "text"}),
                el("wiki-go", "button", id="wiki-go", text="Go", attrs={"type": "submit"}),
            ]),
            el("new-link", "a", id="new-link", text="Create a page", attrs={"href": "/new"}),
        ]),
        page("/new", "New page", [
            el("create-form", "form", id="create-form", children=[
                el("title-field", "input", id="title-field", label="Page title", attrs={"name": "title", "type": "text"}),
                el("category-field", "select", id="category-field", label="Category", attrs={"name": "category"},
                   children=[el(f"cat-{c.lower()}", "option", text=c) for c in ["Fruit", "Animal", "Place", "Tool"]]),
                el("create-btn", "button", id="create-btn", text="Create page", attrs={"type": "submit"}),
            ]),
        ]),
        page("/created", "Page created", [el("created-note", "p", text="Your page was created")]),
    ]
    for name, year, summary in articles:
        s = wslug(name)
        pages.append(page(f"/search?q={s}", "Search results", [
            el("hits", "ul", classes=["hits"], children=[
                el(f"hit-{s}", "a", id=f"hit-{s}", classes=["hit"], text=name, attrs={"href": f"/wiki/{s}"}),
            ]),
        ]))
        pages.append(page(f"/wiki/{s}", name, [
            el("article-title", "h1", text=name),
            el("summary", "p", text=summary),
            el("show-details", "button", id="show-details", text="Show details"),
            el("details", "div", hidden=True, children=[
                el("details-year", "span", id="details-year", text=year),
            ]),
        ]))
    site = {
        "site_id": "wikilite",
        "pages": pages,
        "transitions": [
            trans("/", "submit", "wiki-search-form", [{"effect": "navigate", "url": "/search?q={query:wiki-search}"}]),
            trans("/wiki/*", "click", "show-details", [{"effect": "reveal", "element": "details"}]),
            trans("/new", "submit", "create-form", [
                {"effect": "set-state", "key": "created", "value": "{form:title-field}"},
                {"effect": "set-state", "key": "created_category", "value": "{form:category-field}"},
                {"effect": "navigate", "url": "/created"},
            ], requires={"title-field": "*", "category-field": "*"}),
            trans("/new", "submit", "create-form", [{"effect": "note", "text": "validation-error"}]),
        ],
        "drift_versions": [
            {"version": 1, "rules": [
                {"rule": "set-classes", "page": "/", "element": "wiki-go", "classes": ["button"]},
            ]},
            {"version": 2, "rules": [
                {"rule": "rename-id", "page": "/", "element": "wiki-search", "to": "search-input"},
                {"rule": "relabel", "page": "/", "element": "wiki-search", "label": "Find article"},
            ]},
        ],
    }
    tasks = []
    for i, k in enumerate([0, 2, 4, 5]):
        name = articles[k][0]
        s = wslug(name)
        tasks.append(task("wikilite", f"open-{i + 1}", "open-article", f'Open the wiki article about "{name}"', "/",
                          {"kind": "url-matches", "pattern": f"/wiki/{s}"},
                          [f'type(#wiki-search, "{name}")', "submit(#wiki-search-form)", f"click(#hit-{s})", "stop()"],
                          [f'type(#search-input, "{name}")', "submit(#wiki-search-form)", f"click(#hit-{s})", "stop()"],
                          vars={"query": name, "slug": s}))
    for i, k in enumerate([1, 3, 0, 2]):
        name, year, _ = articles[k]
        s = wslug(name)
        tasks.append(task("wikilite", f"fact-{i + 1}", "fact-lookup", f'In which year was "{name}" introduced?',
                          f"/wiki/{s}", {"kind": "answer-equals", "value": year},
                          ["click(#show-details)", f'answer("{year}")'], answer=year, evidence=f"/wiki/{s}",
                          label="false-no-data"))
    for i, (title, cat) in enumerate([("Kiwi", "Fruit"), ("Otter", "Animal"), ("Lisbon", "Place"), ("Chisel", "Tool")]):
        tasks.append(task("wikilite", f"create-{i + 1}", "create-page",
                          f'Create a page titled "{title}" in category "{cat}"', "/new",
                          {"kind": "all", "all": [
                              {"kind": "state-equals", "key": "created", "value": title},
                              {"kind": "state-equals", "key": "created_category", "value": cat},
                          ]},
                          [f'type(#title-field, "{title}")', f'select(#category-field, "{cat}")', "click(#create-btn)", "stop()"],
                          vars={"title": title, "category": cat}, label="form-fill-failure"))
    policy = {"site_id": "wikilite", "families": {
        "open-article": [
            rule("type", "wiki-search", "{var:query}", url="/", state={"wiki-search": ""}),
            rule("submit", "wiki-search-form", url="/"),
            rule("click", "hit-{var:slug}", url="/search?*"),
            rule("stop", url="/wiki/*"),
        ],
        # gives up before opening the details section
        "fact-lookup": [
            rule("answer", payload="{read:details-year}", url="/wiki/*", present=["details-year"]),
            rule("click", "show-details", url="/wiki/*", mode="false-no-data"),
            rule("answer", payload="No data available", url="/wiki/*"),
        ],
        # types into the category select and submits the half-filled form
        "create-page": [
            rule("stop", url="/created"),
            rule("stop", url="/new", last_result="validation-error"),
            rule("type", "title-field", "{var:title}", url="/new", state={"title-field": ""}),
            rule("type", "category-field", "{var:category}", url="/new", state={"category-field": ""},
                 not_last_result="no-effect"),
            rule("click", "create-btn", url="/new"),
        ],
    }}
    return site, tasks, policy


def tracklite():
    issues = {
        3: ("Crash on save", "bug"),
        5: ("Dark mode", "feature"),
        7: ("Typo in README", "docs"),
        12: ("Button misaligned", "ui"),
        14: ("Login loop", "bug"),
        18: ("Install guide", "docs"),
        21: ("Export to CSV", "feature"),
        25: ("Memory leak", "bug"),
        30: ("API reference", "docs"),
    }
    labels = ["bug", "feature", "docs", "ui"]
    listing = [
        el(f"issue-{n}", "a", id=f"issue-link-{n}", classes=["issue"], text=f"#{n} {title}", attrs={"href": f"/issue/{n}"})
        for n, (title, _) in issues.items()
    ]
    pages = [
        page("/issues", "Issues", [
            el("filter-form", "form", id="filter-form", children=[
                el("label-filter", "select", id="label-filter", label="Label", attrs={"name": "label"},
                   children=[el(f"opt-{l}", "option", text=l) for l in labels]),
                el("apply-filter", "button", id="apply-filter", text="Apply", attrs={"type": "submit"}),
            ]),
            el("issue-list", "ul", classes=["issues"], children=listing),
        ]),
        page("/assigned", "Assignment saved", [el("assigned-note", "p", text="The issue was assigned")]),
    ]
    for l in labels:
        matching = [n for n, (_, lab) in issues.items() if lab == l]
        pages.append(page(f"/issues?label={l}", f"Issues labeled {l}", [
            el("open-count-label", "span", text="Open issues:"),
            el("open-count", "span", id="open-count", text=str(len(matching))),
            el("filtered-list", "ul", classes=["issues"], children=[
                el(f"issue-{n}", "a", id=f"issue-link-{n}", classes=["issue"], text=f"#{n} {issues[n][0]}",
                   attrs={"href": f"/issue/{n}"}) for n in matching
            ]),
        ]))
    for n, (title, _) in issues.items():
        pages.append(page(f"/issue/{n}", f"Issue {n}", [
            el("issue-title", "h1", text=f"#{n} {title}"),
            el("assignee-select", "select", id="assignee-select", label="Assignee", attrs={"name": "assignee"},
               children=[el(f"who-{w}", "option", text=w) for w in ["alice", "bob", "carol"]]),
            el("assign-btn", "button", id="assign-btn", text="Assign"),
            el("back-link", "a", id="back-link", text="All issues", attrs={"href": "/issues"}),
            el("cookie-banner", "div", modal=True, children=[
                el("cookie-text", "p", text="We use cookies"),
                el("cookie-accept", "button", id="cookie-accept", text="Accept cookies"),
            ]),
        ]))
    site = {
        "site_id": "tracklite",
        "pages": pages,
        "transitions": [
            trans("/issues", "submit", "filter-form", [{"effect": "navigate", "url": "/issues?label={query:label-filter}"}]),
            trans("/issue/*", "click", "cookie-accept", [{"effect": "hide", "element": "cookie-banner"}]),
            trans("/issue/*", "click", "assign-btn", [
                {"effect": "set-state", "key": "assigned_issue", "value": "{url}"},
                {"effect": "set-state", "key": "assignee", "value": "{form:assignee-select}"},
                {"effect": "navigate", "url": "/assigned"},
            ], requires={"assignee-select": "*"}),
        ],
        "drift_versions": [
            {"version": 1, "rules": [
                {"rule": "reverse-children", "page": "/issues", "element": "issue-list"},
            ]},
            {"version": 2, "rules": [
                {"rule": "rename-id", "page": "/issues", "element": "label-filter", "to": "tag-filter"},
                {"rule": "relabel", "page": "/issues", "element": "label-filter", "label": "Tag"},
            ]},
        ],
    }
    tasks = []
    for i, l in enumerate(["bug", "docs", "feature", "ui"]):
        tasks.append(task("tracklite", f"filter-{i + 1}", "filter-issues", f'Show the issues with label "{l}"', "/issues",
                          {"kind": "url-matches", "pattern": f"/issues?label={l}"},
                          [f'select(#label-filter, "{l}")', "submit(#filter-form)", "stop()"],
                          [f'select(#tag-filter, "{l}")', "submit(#filter-form)", "stop()"],
                          vars={"label": l}))
    for i, l in enumerate(["docs", "bug", "feature", "ui"]):
        count = str(sum(1 for _, lab in issues.values() if lab == l))
        tasks.append(task("tracklite", f"count-{i + 1}", "count-issues", f'How many open issues have label "{l}"?',
                          f"/issues?label={l}", {"kind": "answer-equals", "value": count},
                          [f'answer("{count}")'], answer=count, evidence=f"/issues?label={l}", label="empty-answer"))
    for i, (n, who) in enumerate([(12, "alice"), (3, "bob"), (7, "carol"), (21, "alice")]):
        tasks.append(task("tracklite", f"assign-{i + 1}", "assign-issue", f'Assign issue {n} to "{who}"', f"/issue/{n}",
                          {"kind": "all", "all": [
                              {"kind": "state-equals", "key": "assigned_issue", "value": f"/issue/{n}"},
                              {"kind": "state-equals", "key": "assignee", "value": who},
                          ]},
                          ["click(#cookie-accept)", f'select(#assignee-select, "{who}")', "click(#assign-btn)", "stop()"],
                          vars={"issue": str(n), "assignee": who}, label="oscillation"))
    policy = {"site_id": "tracklite", "families": {
        "filter-issues": [
            rule("select", "label-filter", "{var:label}", url="/issues", state={"label-filter": ""}),
            rule("submit", "filter-form", url="/issues"),
            rule("stop", url="/issues?*"),
        ],
        # reads the count but never submits it
        "count-issues": [
            rule("answer", payload="{read:open-count}", url="/issues?*", mode="empty-answer"),
            rule("stop", url="/issues?*"),
        ],
        # bounces between the issue and the list while the cookie banner blocks it
        "assign-issue": [
            rule("stop", url="/assigned"),
            rule("select", "assignee-select", "{var:assignee}", url="/issue/*", modal=False, state={"assignee-select": ""}),
            rule("click", "assign-btn", url="/issue/*", modal=False),
            rule("select", "assignee-select", "{var:assignee}", url="/issue/*", not_last_result="blocked-by-modal"),
            rule("goto", payload="/issues", url="/issue/*"),
            rule("click", "issue-{var:issue}", url="/issues"),
        ],
    }}
    return site, tasks, policy


MOCK = {
    "defaults": {
        "policy": "stop()",
        "attributor": "I cannot tell from this trace.",
        "scorer": "n/a",
        "inducer": "",
    },
    "entries": [],
}

CONFIG = """# Default experiment: scripted policies, lexical scorer, mock language model.
seed = 7
train_fraction = 0.3
attribution = "rule"
policy = "scripted"
scorer = "lexical"
drift_version = 0
fixtures = "."
sites = ["shoplite", "wikilite", "tracklite"]
mock_table = "mock/llm.json"

[runtime]
step_budget = 20
reasoning_threshold = 0.3
interaction_threshold = 0.3

[evolution]
smoothing = 1.0
utility_prune_threshold = 0.35
min_usage_for_prune = 4
merge_similarity_threshold = 0.6
max_patch_failures = 3
"""


def dump(path, value):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(value, indent=2, sort_keys=True) + "\n")


def main():
    for build in (shoplite, wikilite, tracklite):
        site, tasks, policy = build()
        sid = site["site_id"]
        dump(ROOT / "sites" / f"{sid}.json", site)
        dump(ROOT / "tasks" / f"{sid}.json", {"site_id": sid, "tasks": tasks})
        dump(ROOT / "policies" / f"{sid}.json", policy)
    dump(ROOT / "mock" / "llm.json", MOCK)
    (ROOT / "harness.toml").write_text(CONFIG)


if __name__ == "__main__":
    main()
