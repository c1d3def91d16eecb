"""A small BIRD-layout fixture corpus: a handful of SQLite databases plus dev.json.

Everything is generated from a fixed seed so tests, golden files and the CLI
``make-fixture`` command all see byte-identical data.
"""

from __future__ import annotations

import json
import random
import sqlite3
from pathlib import Path

_SCHEMAS = {
    "formula_1": """
        CREATE TABLE drivers (
            driverId INTEGER PRIMARY KEY, driverRef TEXT, code TEXT,
            forename TEXT NOT NULL, surname TEXT NOT NULL, nationality TEXT, dob DATE);
        CREATE TABLE races (
            raceId INTEGER PRIMARY KEY, year INTEGER, round INTEGER, name TEXT, date DATE);
        CREATE TABLE qualifying (
            qualifyId INTEGER PRIMARY KEY,
            raceId INTEGER REFERENCES races(raceId),
            driverId INTEGER REFERENCES drivers(driverId),
            position INTEGER, q1 TEXT, q2 TEXT, q3 TEXT);
    """,
    "california_schools": """
        CREATE TABLE schools (
            CDSCode TEXT PRIMARY KEY, School TEXT, County TEXT, City TEXT,
            Charter INTEGER, OpenDate DATE);
        CREATE TABLE satscores (
            cds TEXT PRIMARY KEY REFERENCES schools(CDSCode),
            NumTstTakr INTEGER, AvgScrRead INTEGER, AvgScrMath INTEGER, AvgScrWrite INTEGER);
    """,
    "retail": """
        CREATE TABLE customers (
            customer_id INTEGER PRIMARY KEY, name TEXT, city TEXT, segment TEXT);
        CREATE TABLE products (
            product_id INTEGER PRIMARY KEY, title TEXT, category TEXT, price REAL);
        CREATE TABLE orders (
            order_id INTEGER PRIMARY KEY,
            customer_id INTEGER REFERENCES customers(customer_id),
            product_id INTEGER REFERENCES products(product_id),
            quantity INTEGER, order_date DATE, status TEXT);
    """,
    "library": """
        CREATE TABLE authors (
            author_id INTEGER PRIMARY KEY, full_name TEXT, country TEXT, born INTEGER);
        CREATE TABLE books (
            book_id INTEGER PRIMARY KEY, author_id INTEGER REFERENCES authors(author_id),
            title TEXT, genre TEXT, published INTEGER, pages INTEGER);
        CREATE TABLE loans (
            loan_id INTEGER PRIMARY KEY, book_id INTEGER REFERENCES books(book_id),
            member TEXT, loaned_on DATE, returned INTEGER);
    """,
}

_NATIONALITIES = ["British", "German", "Finnish", "Spanish", "French", "Dutch", "Italian"]
_FORENAMES = ["Lewis", "Sebastian", "Kimi", "Fernando", "Max", "Charles", "Lando", "Carlos",
              "Daniel", "Valtteri", "Pierre", "Esteban", "George", "Nico", "Jenson"]
_SURNAMES = ["Hamilton", "Vettel", "Raikkonen", "Alonso", "Verstappen", "Leclerc", "Norris",
             "Sainz", "Ricciardo", "Bottas", "Gasly", "Ocon", "Russell", "Rosberg", "Button"]
_GP = ["Australian", "Bahrain", "Chinese", "Spanish", "Monaco", "Canadian", "British", "Italian"]
_COUNTIES = ["Alameda", "Fresno", "Los Angeles", "Orange", "Sacramento", "San Diego"]
_CITIES = ["Oakland", "Fresno", "Pasadena", "Irvine", "Davis", "Chula Vista", "Berkeley"]
_SEGMENTS = ["consumer", "corporate", "home office"]
_CATEGORIES = ["books", "garden", "kitchen", "toys", "sports"]
_STATUSES = ["shipped", "pending", "cancelled", "returned"]
_GENRES = ["fantasy", "history", "mystery", "poetry", "science"]
_COUNTRIES = ["Chile", "Japan", "Nigeria", "Norway", "Peru", "Canada"]
_MEMBERS = ["ana", "bo", "cyd", "dee", "eli", "fay", "gus"]


def _laptime(rng: random.Random) -> str:
    return f"1:{rng.randint(10, 40):02d}.{rng.randint(0, 999):03d}"


def _populate(db_id: str, conn: sqlite3.Connection, rng: random.Random) -> None:
    ins = conn.executemany
    if db_id == "formula_1":
        ins("INSERT INTO drivers VALUES (?,?,?,?,?,?,?)", [
            (i + 1, s.lower(), s[:3].upper(), f, s, _NATIONALITIES[i % len(_NATIONALITIES)],
             f"{1975 + (i * 3) % 25}-{1 + i % 12:02d}-{1 + (i * 7) % 28:02d}")
            for i, (f, s) in enumerate(zip(_FORENAMES, _SURNAMES))])
        ins("INSERT INTO races VALUES (?,?,?,?,?)", [
            (i + 1, 2008 + i // 4, i % 4 + 1, f"{_GP[i % len(_GP)]} Grand Prix",
             f"{2008 + i // 4}-{3 + (i % 4) * 2:02d}-{10 + i % 15:02d}")
            for i in range(16)])
        rows, qid = [], 1
        for race in range(1, 17):
            grid = rng.sample(range(1, 16), 10)
            for pos, driver in enumerate(grid, start=1):
                q3 = _laptime(rng) if pos <= 6 else None
                rows.append((qid, race, driver, pos, _laptime(rng), _laptime(rng) if pos <= 8 else None, q3))
                qid += 1
        ins("INSERT INTO qualifying VALUES (?,?,?,?,?,?,?)", rows)
    elif db_id == "california_schools":
        schools, scores = [], []
        for i in range(40):
            cds = f"{1000000 + i * 37:07d}"
            schools.append((cds, f"School {i:02d}", _COUNTIES[i % len(_COUNTIES)],
                            _CITIES[(i * 3) % len(_CITIES)], i % 3 == 0,
                            f"{1960 + i}-0{1 + i % 9}-15"))
            if i % 5 != 4:
                scores.append((cds, rng.randint(5, 400), rng.randint(380, 640),
                               rng.randint(380, 660), rng.randint(380, 630)))
        ins("INSERT INTO schools VALUES (?,?,?,?,?,?)", schools)
        ins("INSERT INTO satscores VALUES (?,?,?,?,?)", scores)
    elif db_id == "retail":
        ins("INSERT INTO customers VALUES (?,?,?,?)", [
            (i + 1, f"customer {i + 1}", _CITIES[i % len(_CITIES)], _SEGMENTS[i % 3]) for i in range(25)])
        ins("INSERT INTO products VALUES (?,?,?,?)", [
            (i + 1, f"product {i + 1}", _CATEGORIES[i % len(_CATEGORIES)], round(rng.uniform(2, 120), 2))
            for i in range(20)])
        ins("INSERT INTO orders VALUES (?,?,?,?,?,?)", [
            (i + 1, rng.randint(1, 25), rng.randint(1, 20), rng.randint(1, 6),
             f"2023-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}", rng.choice(_STATUSES))
            for i in range(120)])
    elif db_id == "library":
        ins("INSERT INTO authors VALUES (?,?,?,?)", [
            (i + 1, f"author {chr(65 + i)}", _COUNTRIES[i % len(_COUNTRIES)], 1900 + i * 4) for i in range(18)])
        ins("INSERT INTO books VALUES (?,?,?,?,?,?)", [
            (i + 1, rng.randint(1, 18), f"book {i + 1}", _GENRES[i % len(_GENRES)],
             rng.randint(1950, 2022), rng.randint(80, 900)) for i in range(60)])
        ins("INSERT INTO loans VALUES (?,?,?,?,?)", [
            (i + 1, rng.randint(1, 60), rng.choice(_MEMBERS),
             f"2024-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}", rng.randint(0, 1))
            for i in range(90)])


# (db_id, question, evidence, gold SQL, difficulty)
_EXAMPLES = [
    ("formula_1", "What is the driver code of the driver with the fastest Q3 time in race 7?",
     "fastest Q3 time refers to the smallest q3",
     "SELECT T2.code FROM qualifying AS T1 INNER JOIN drivers AS T2 ON T1.driverId = T2.driverId "
     "WHERE T1.raceId = 7 AND T1.q3 IS NOT NULL ORDER BY T1.q3 ASC LIMIT 1", "moderate"),
    ("formula_1", "List the surnames of all German drivers.", "German refers to nationality = 'German'",
     "SELECT surname FROM drivers WHERE nationality = 'German'", "simple"),
    ("formula_1", "How many races took place in 2010?", "",
     "SELECT COUNT(raceId) FROM races WHERE year = 2010", "simple"),
    ("formula_1", "Which distinct nationalities have drivers that reached Q3 in 2011?",
     "reached Q3 refers to q3 IS NOT NULL",
     "SELECT DISTINCT T1.nationality FROM drivers AS T1 INNER JOIN qualifying AS T2 ON T1.driverId = T2.driverId "
     "INNER JOIN races AS T3 ON T2.raceId = T3.raceId WHERE T3.year = 2011 AND T2.q3 IS NOT NULL", "challenging"),
    ("formula_1", "Give the forename of drivers born after 1990 who started from pole at least once.",
     "pole refers to position = 1; born after 1990 refers to STRFTIME('%Y', dob) > '1990'",
     "SELECT DISTINCT T1.forename FROM drivers AS T1 INNER JOIN qualifying AS T2 ON T1.driverId = T2.driverId "
     "WHERE T2.position = 1 AND STRFTIME('%Y', T1.dob) > '1990'", "moderate"),
    ("formula_1", "Name the races held in round 2 after 2009.", "",
     "SELECT name FROM races WHERE round = 2 AND year > 2009", "simple"),
    ("formula_1", "How many drivers had a position better than 4 in race 3?", "better than 4 refers to position < 4",
     "SELECT COUNT(driverId) FROM qualifying WHERE raceId = 3 AND position < 4", "simple"),
    ("california_schools", "List the schools in Orange county that are charter schools.",
     "charter schools refers to Charter = 1",
     "SELECT School FROM schools WHERE County = 'Orange' AND Charter = 1", "simple"),
    ("california_schools", "What is the average math score of schools in Alameda county?", "",
     "SELECT AVG(T2.AvgScrMath) FROM schools AS T1 INNER JOIN satscores AS T2 ON T1.CDSCode = T2.cds "
     "WHERE T1.County = 'Alameda'", "moderate"),
    ("california_schools", "Which cities have a school with more than 200 test takers?", "",
     "SELECT DISTINCT T1.City FROM schools AS T1 INNER JOIN satscores AS T2 ON T1.CDSCode = T2.cds "
     "WHERE T2.NumTstTakr > 200", "moderate"),
    ("california_schools", "Name the school with the highest reading score.", "",
     "SELECT T1.School FROM schools AS T1 INNER JOIN satscores AS T2 ON T1.CDSCode = T2.cds "
     "ORDER BY T2.AvgScrRead DESC LIMIT 1", "simple"),
    ("california_schools", "How many schools opened after 1980 in Orange county?",
     "opened after 1980 refers to STRFTIME('%Y', OpenDate) > '1980'",
     "SELECT COUNT(CDSCode) FROM schools WHERE County = 'Orange' AND STRFTIME('%Y', OpenDate) > '1980'", "moderate"),
    ("california_schools", "List the counties whose average writing score exceeds 500.", "",
     "SELECT T1.County FROM schools AS T1 INNER JOIN satscores AS T2 ON T1.CDSCode = T2.cds "
     "GROUP BY T1.County HAVING AVG(T2.AvgScrWrite) > 500", "challenging"),
    ("retail", "How many orders were shipped?", "shipped refers to status = 'shipped'",
     "SELECT COUNT(order_id) FROM orders WHERE status = 'shipped'", "simple"),
    ("retail", "List the distinct cities of corporate customers who placed an order of more than 3 units.", "",
     "SELECT DISTINCT T1.city FROM customers AS T1 INNER JOIN orders AS T2 ON T1.customer_id = T2.customer_id "
     "WHERE T1.segment = 'corporate' AND T2.quantity > 3", "moderate"),
    ("retail", "What is the total quantity ordered for kitchen products?", "",
     "SELECT SUM(T2.quantity) FROM products AS T1 INNER JOIN orders AS T2 ON T1.product_id = T2.product_id "
     "WHERE T1.category = 'kitchen'", "moderate"),
    ("retail", "Which products cost more than 90?", "",
     "SELECT title FROM products WHERE price > 90", "simple"),
    ("retail", "Name the customers who cancelled an order in 2023 from Oakland.",
     "cancelled refers to status = 'cancelled'",
     "SELECT DISTINCT T1.name FROM customers AS T1 INNER JOIN orders AS T2 ON T1.customer_id = T2.customer_id "
     "WHERE T1.city = 'Oakland' AND T2.status = 'cancelled' AND STRFTIME('%Y', T2.order_date) = '2023'",
     "challenging"),
    ("retail", "How many pending orders were placed in March 2023?",
     "March 2023 refers to STRFTIME('%Y-%m', order_date) = '2023-03'",
     "SELECT COUNT(order_id) FROM orders WHERE status = 'pending' AND STRFTIME('%Y-%m', order_date) = '2023-03'",
     "moderate"),
    ("library", "List the titles of fantasy books longer than 400 pages.", "",
     "SELECT title FROM books WHERE genre = 'fantasy' AND pages > 400", "simple"),
    ("library", "Which countries do authors of history books come from?", "",
     "SELECT DISTINCT T1.country FROM authors AS T1 INNER JOIN books AS T2 ON T1.author_id = T2.author_id "
     "WHERE T2.genre = 'history'", "moderate"),
    ("library", "How many loans by member 'bo' have not been returned?", "not returned refers to returned = 0",
     "SELECT COUNT(loan_id) FROM loans WHERE member = 'bo' AND returned = 0", "simple"),
    ("library", "Name the authors born before 1930 who published a book after 2000.", "",
     "SELECT DISTINCT T1.full_name FROM authors AS T1 INNER JOIN books AS T2 ON T1.author_id = T2.author_id "
     "WHERE T1.born < 1930 AND T2.published > 2000", "moderate"),
    ("library", "What are the titles of books loaned by 'ana' that were returned?", "",
     "SELECT DISTINCT T1.title FROM books AS T1 INNER JOIN loans AS T2 ON T1.book_id = T2.book_id "
     "WHERE T2.member = 'ana' AND T2.returned = 1", "moderate"),
    ("library", "List the genres with more than 5 books published after 1980.", "",
     "SELECT genre FROM books WHERE published > 1980 GROUP BY genre HAVING COUNT(book_id) > 5", "challenging"),
]


def build_fixture(root, seed: int = 7) -> Path:
    """Write ``<root>/<db_id>/<db_id>.sqlite`` for every fixture database plus ``<root>/dev.json``.

    Existing database files are replaced. Returns the path of dev.json.
    """
    root = Path(root)
    rng = random.Random(seed)
    for db_id, ddl in _SCHEMAS.items():
        path = root / db_id / f"{db_id}.sqlite"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.unlink(missing_ok=True)
        conn = sqlite3.connect(path)
        try:
            conn.executescript(ddl)
            _populate(db_id, conn, rng)
            conn.commit()
        finally:
            conn.close()
    records = [
        {"question_id": i, "db_id": db_id, "question": q, "evidence": ev, "SQL": sql, "difficulty": diff}
        for i, (db_id, q, ev, sql, diff) in enumerate(_EXAMPLES)
    ]
    dev = root / "dev.json"
    dev.write_text(json.dumps(records, indent=2) + "\n", encoding="utf-8")
    return dev
