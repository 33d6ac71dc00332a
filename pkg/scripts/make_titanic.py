"""Regenerate the bundled Titanic-shaped demo corpus (src/spot/data/titanic.csv).

The file is synthetic but reproduces the well-known marginals of the classic
891-row passenger list, so documentation examples stay familiar:

    Sex        male=577, female=314
    Pclass     1=216, 2=184, 3=491
    Survived   0=549, 1=342
    Age        177 missing
    Embarked   S=644, C=168, Q=77, 2 missing
    Cabin      687 missing, 147 distinct values among the rest
    Ticket     681 distinct, ~70% purely numeric
    Name       891 distinct, commas in every one, quotes in some

The generator is deterministic (fixed seed) and asserts every invariant the
test suite relies on before writing, including: no embedded newlines in any
field, and each data line contains the raw substring ",male," or ",female,"
exactly once so a plain text scan can count Sex without a CSV parser.
"""

from __future__ import annotations

import csv
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "src" / "spot" / "data" / "titanic.csv"

HEADER = [
    "PassengerId",
    "Survived",
    "Pclass",
    "Name",
    "Sex",
    "Age",
    "SibSp",
    "Parch",
    "Ticket",
    "Fare",
    "Cabin",
    "Embarked",
]

N = 891

SURNAMES = [
    "Abbott", "Ahlin", "Allen", "Anders", "Andrews", "Appleton", "Arnold", "Ashby",
    "Atkinson", "Backstrom", "Bailey", "Banfield", "Barbara", "Barton", "Bateman",
    "Baxter", "Beane", "Beckwith", "Behr", "Bentham", "Berglund", "Bishop", "Bjornstrom",
    "Blackwell", "Bonnell", "Bowen", "Bradley", "Braund", "Brewe", "Brocklebank",
    "Brown", "Bryhl", "Buckley", "Burke", "Butt", "Byles", "Calderhead", "Cameron",
    "Campbell", "Cardeza", "Carlsson", "Carter", "Cavendish", "Chaffee", "Chapman",
    "Cherry", "Chibnall", "Christy", "Clarke", "Cleaver", "Clifford", "Cohen",
    "Coleridge", "Collander", "Collett", "Compton", "Connolly", "Cordone", "Corey",
    "Cornell", "Cotterill", "Crafton", "Cribb", "Crosby", "Cumings", "Daly", "Danbom",
    "Davidson", "Davies", "Dawson", "Dean", "Dennis", "Devaney", "Dimic", "Dodge",
    "Doling", "Donahue", "Dorking", "Douglas", "Downton", "Drazenovic", "Duane",
    "Earnshaw", "Eklund", "Ekstrom", "Elias", "Emanuel", "Endres", "Enander",
    "Eustis", "Evans", "Farthing", "Faunthorpe", "Fillbrook", "Fleming", "Flynn",
    "Foley", "Ford", "Fortune", "Fox", "Frauenthal", "Frolicher", "Fry", "Funk",
    "Gale", "Gallagher", "Garside", "Gaskell", "Gavey", "Gee", "Gibson", "Giles",
    "Gill", "Goldenberg", "Goldsmith", "Goodwin", "Graham", "Greenberg", "Grimm",
    "Gustafsson", "Hagland", "Hale", "Hamalainen", "Hansen", "Harbeck", "Harknett",
    "Harper", "Harrington", "Hart", "Hassan", "Hawksford", "Hays", "Healy", "Hedman",
    "Heikkinen", "Henriksson", "Herman", "Hewlett", "Hickman", "Hiltunen", "Hocking",
    "Hodges", "Hogeboom", "Holm", "Holverson", "Homer", "Honkanen", "Hood", "Horgan",
    "Hosono", "Howard", "Hunt", "Ibrahim", "Ilett", "Isham", "Jacobsohn", "Jalsevac",
    "Jansson", "Jardin", "Jarvis", "Jensen", "Jermyn", "Johansson", "Johnson",
    "Jonkoff", "Jussila", "Kallio", "Kantor", "Karlsson", "Keane", "Kelly", "Kent",
    "Kenyon", "Kiernan", "Kimball", "Kirkland", "Klaber", "Kvillner", "Lahtinen",
    "Laitinen", "Lam", "Landergren", "Lang", "Laroche", "Larsson", "Leader", "Lefebre",
    "Lehmann", "Leinonen", "Lemore", "Lester", "Levy", "Leyson", "Lindahl", "Lindblom",
    "Lindqvist", "Lines", "Lithman", "Lobb", "Lockyer", "Long", "Louch", "Lovell",
    "Lundahl", "Lurette", "Madigan", "Madsen", "Maenpaa", "Maisner", "Mangan",
    "Mannion", "Markun", "Marvin", "Matthews", "Mayne", "McCarthy", "McCoy",
    "McDermott", "McEvoy", "McGough", "McKane", "Meanwell", "Meek", "Mellinger",
    "Meyer", "Midtsjo", "Millet", "Minahan", "Mineff", "Mitchell", "Mockler", "Moen",
    "Molson", "Moore", "Moran", "Morley", "Morrow", "Moss", "Moubarek", "Mudd",
    "Mullens", "Murphy", "Myhrman", "Nakid", "Nasser", "Natsch", "Navratil", "Nenkoff",
    "Newell", "Newsom", "Nicholls", "Nilsson", "Niskanen", "Nosworthy", "Novel",
    "Nysten", "Oalman", "Ohman", "Olsen", "Olsson", "Oreskovic", "Osen", "Ostby",
    "Otter", "Padro", "Pain", "Palsson", "Panula", "Parkes", "Parrish", "Pasic",
    "Patchett", "Paulner", "Pavlovic", "Peacock", "Pearce", "Pears", "Pedersen",
    "Pekoniemi", "Peltomaki", "Pengelly", "Perkin", "Persson", "Peter", "Petroff",
    "Pettersson", "Peuchen", "Phillips", "Pickard", "Pinsky", "Plotcharsky", "Pokrnic",
    "Porter", "Potter", "Quick", "Radeff", "Rashid", "Reeves", "Rekic", "Renouf",
    "Reynaldo", "Rice", "Richards", "Ridsdale", "Ringhini", "Rintamaki", "Robbins",
    "Robert", "Rogers", "Rommetvedt", "Rosblom", "Ross", "Rothes", "Rouse", "Rugg",
    "Ryerson", "Saad", "Saalfeld", "Sadlier", "Sage", "Salkjelsvik", "Salonen",
    "Sandstrom", "Sawyer", "Scanlan", "Schmidt", "Sedgwick", "Serepeca", "Sharp",
    "Sheerlinck", "Shelley", "Shorney", "Silven", "Simmons", "Sincock", "Sirayanian",
    "Sivola", "Sjoblom", "Skoog", "Slabenoff", "Slayter", "Sloper", "Smart", "Smiljanic",
    "Sobey", "Soholt", "Somerton", "Spector", "Spencer", "Stahelin", "Stankovic",
    "Stanley", "Staneff", "Stead", "Stewart", "Stokes", "Strandberg", "Stranden",
    "Strom", "Sunderland", "Sundman", "Sutton", "Svensson", "Swane", "Sweet", "Taussig",
    "Taylor", "Tenglin", "Thayer", "Theobald", "Thomas", "Thorne", "Tikkanen", "Tobin",
    "Todoroff", "Toomey", "Torber", "Tornquist", "Toufik", "Troupiansky", "Trout",
    "Turcin", "Turkula", "Turpin", "Uruchurtu", "Vestrom", "Walker", "Ward", "Ware",
    "Watson", "Webber", "Weir", "West", "Wheadon", "White", "Wick", "Widener",
    "Wiklund", "Wilhelms", "Williams", "Windelov", "Wirz", "Wiseman", "Wittevrongel",
    "Woolner", "Wright", "Yasbeck", "Young", "Yrois", "Zabour", "Zimmerman",
]

MALE_GIVEN = [
    "Adolf", "Albert", "Alexander", "Alfred", "Anders", "Anthony", "Arthur", "August",
    "Bengt", "Bernhard", "Carl", "Charles", "Daniel", "David", "Edgar", "Edward",
    "Emil", "Eric", "Ernest", "Eugene", "Francis", "Frank", "Frederick", "George",
    "Gustav", "Harry", "Henry", "Herbert", "Hugh", "Ivan", "Jacob", "James", "Johan",
    "John", "Joseph", "Karl", "Lawrence", "Leonard", "Lewis", "Louis", "Martin",
    "Matthew", "Michael", "Nils", "Oscar", "Patrick", "Percival", "Peter", "Philip",
    "Richard", "Robert", "Samuel", "Sidney", "Stephen", "Thomas", "Timothy", "Victor",
    "Walter", "William",
]

FEMALE_GIVEN = [
    "Ada", "Agnes", "Alice", "Amelia", "Anna", "Annie", "Augusta", "Beatrice",
    "Bertha", "Bridget", "Catherine", "Cecilia", "Charlotte", "Clara", "Dorothy",
    "Edith", "Eleanor", "Elin", "Elizabeth", "Ellen", "Elna", "Emily", "Emma",
    "Esther", "Ethel", "Eva", "Florence", "Gerda", "Grace", "Hanna", "Helen",
    "Hilda", "Ida", "Jane", "Jessie", "Johanna", "Julia", "Karin", "Kate",
    "Katherine", "Laura", "Lillian", "Louise", "Lucy", "Mabel", "Maija", "Margaret",
    "Maria", "Marion", "Martha", "Mary", "Matilda", "Maude", "Nora", "Olga", "Ruth",
    "Sara", "Selma", "Sigrid", "Sofia", "Susan", "Velma", "Vera",
]

NICKNAMES = ["Archie", "Bertie", "Billy", "Bess", "Dot", "Eddie", "Effie", "Fred",
             "Jack", "Jim", "Kit", "Lottie", "Maggie", "Nell", "Ned", "Polly",
             "Tess", "Tim", "Tilly", "Toby"]

TICKET_PREFIXES = ["A/5", "PC", "STON/O2.", "C.A.", "SOTON/OQ", "W./C.", "SC/Paris",
                   "F.C.C.", "S.O.C.", "PP", "A/4", "CA.", "LINE", "W.E.P."]

DECKS = "ABCDEFG"


def counted(rng: random.Random, pairs: list[tuple[str, int]]) -> list[str]:
    out: list[str] = []
    for value, count in pairs:
        out.extend([value] * count)
    rng.shuffle(out)
    return out


def make_names(rng: random.Random, sexes: list[str]) -> list[str]:
    names: list[str] = []
    seen: set[str] = set()
    for i, sex in enumerate(sexes):
        surname = rng.choice(SURNAMES)
        if sex == "male":
            given = rng.choice(MALE_GIVEN)
            title = "Master" if rng.random() < 0.06 else "Mr"
            extra = rng.choice(MALE_GIVEN) if rng.random() < 0.4 else ""
            name = f"{surname}, {title}. {given}" + (f" {extra}" if extra else "")
        else:
            given = rng.choice(FEMALE_GIVEN)
            roll = rng.random()
            title = "Miss" if roll < 0.5 else ("Mrs" if roll < 0.95 else "Dr")
            if title == "Mrs" and rng.random() < 0.7:
                husband = rng.choice(MALE_GIVEN)
                name = f"{surname}, Mrs. {husband} ({given} {rng.choice(FEMALE_GIVEN)})"
            else:
                name = f"{surname}, {title}. {given}"
        if rng.random() < 0.035:
            name += f' "{rng.choice(NICKNAMES)}"'
        while name in seen:
            name = f"{name} {rng.choice(MALE_GIVEN + FEMALE_GIVEN)}"
        seen.add(name)
        names.append(name)
    return names


def make_tickets(rng: random.Random) -> list[str]:
    distinct: set[str] = set()
    while len(distinct) < 477:  # purely numeric
        distinct.add(str(rng.randint(10000, 3999999)))
    numeric = list(distinct)
    prefixed: set[str] = set()
    while len(prefixed) < 204:
        prefixed.add(f"{rng.choice(TICKET_PREFIXES)} {rng.randint(1000, 99999)}")
    pool = numeric + sorted(prefixed)
    rng.shuffle(pool)
    tickets = pool + [rng.choice(pool) for _ in range(N - len(pool))]
    rng.shuffle(tickets)
    return tickets


def make_cabins(rng: random.Random) -> list[str]:
    distinct: set[str] = set()
    while len(distinct) < 147:
        deck = rng.choice(DECKS)
        num = rng.randint(1, 148)
        cabin = f"{deck}{num}"
        if rng.random() < 0.08:
            cabin = f"{cabin} {deck}{num + 2}"
        distinct.add(cabin)
    pool = sorted(distinct)
    values = pool + [rng.choice(pool) for _ in range(204 - len(pool))]
    rng.shuffle(values)
    present_rows = rng.sample(range(N), 204)
    cabins = [""] * N
    for row, value in zip(present_rows, values):
        cabins[row] = value
    return cabins


def make_ages(rng: random.Random) -> list[str]:
    missing_rows = set(rng.sample(range(N), 177))
    ages: list[str] = []
    for i in range(N):
        if i in missing_rows:
            ages.append("")
            continue
        if rng.random() < 0.03:
            ages.append(str(rng.choice([0.42, 0.67, 0.75, 0.83, 0.92]) if rng.random() < 0.3
                            else rng.randint(1, 70) + 0.5))
        else:
            ages.append(str(rng.randint(1, 7) if rng.random() < 0.07
                            else int(min(80, max(1, rng.gauss(29, 13))))))
    return ages


def make_fares(rng: random.Random, classes: list[str]) -> list[str]:
    base = {"1": 84.0, "2": 20.6, "3": 13.6}
    fares: list[str] = []
    for c in classes:
        raw = max(0.0, rng.lognormvariate(0.0, 0.55) * base[c] * 0.7)
        text = f"{raw:.4f}".rstrip("0").rstrip(".")
        fares.append(text if text else "0")
    return fares


def main() -> None:
    rng = random.Random(891)
    sexes = counted(rng, [("male", 577), ("female", 314)])
    classes = counted(rng, [("1", 216), ("2", 184), ("3", 491)])
    survived = counted(rng, [("0", 549), ("1", 342)])
    embarked = counted(rng, [("S", 644), ("C", 168), ("Q", 77), ("", 2)])
    names = make_names(rng, sexes)
    ages = make_ages(rng)
    tickets = make_tickets(rng)
    cabins = make_cabins(rng)
    fares = make_fares(rng, classes)
    sibsp = [str(rng.choices([0, 1, 2, 3, 4, 5, 8], weights=[608, 209, 28, 16, 18, 5, 7])[0])
             for _ in range(N)]
    parch = [str(rng.choices([0, 1, 2, 3, 4, 5, 6], weights=[678, 118, 80, 5, 4, 5, 1])[0])
             for _ in range(N)]

    rows = []
    for i in range(N):
        rows.append([
            str(i + 1), survived[i], classes[i], names[i], sexes[i], ages[i],
            sibsp[i], parch[i], tickets[i], fares[i], cabins[i], embarked[i],
        ])

    # Invariants the test oracles rely on.
    assert len({r[3] for r in rows}) == N, "names must be distinct"
    assert sum(1 for r in rows if r[4] == "male") == 577
    assert sum(1 for r in rows if r[5] == "") == 177
    assert sum(1 for r in rows if r[10] == "") == 687
    assert len({r[10] for r in rows if r[10]}) == 147
    assert len({r[8] for r in rows}) == 681
    numeric_tickets = sum(1 for r in rows if r[8].isdigit())
    assert 0.55 < numeric_tickets / N < 0.85, numeric_tickets
    for r in rows:
        assert all("\n" not in cell and "\r" not in cell for cell in r)

    OUT.parent.mkdir(parents=True, exist_ok=True)
    with open(OUT, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HEADER)
        writer.writerows(rows)

    # The raw-text Sex scan must see exactly one ,male, / ,female, per line.
    text = OUT.read_text(encoding="utf-8").splitlines()[1:]
    assert len(text) == N, "quoted fields must not contain newlines"
    for line in text:
        hits = line.count(",male,") + line.count(",female,")
        assert hits == 1, line
    print(f"wrote {OUT} ({N} rows)")


if __name__ == "__main__":
    main()
