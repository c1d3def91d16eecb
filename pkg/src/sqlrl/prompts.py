"""Prompt templates: the SQL judge rubric and the reasoning-format generation prompt.

Placeholders are ``{NAME}`` tokens filled by :func:`fill`, which substitutes in a
single pass so user text containing braces is never re-expanded.
"""

from __future__ import annotations

import re
from typing import Mapping

JUDGE_TEMPLATE = """\
You are an experienced database expert. Your task is to evaluate a generated SQL query by comparing it to the ground truth (gold) query and then assign a score between 0.0 and 2.0. A higher score indicates the predicted query is more correct, while a score of 0.0 means it is completely incorrect.

Follow these evaluation rules strictly:

1. SELECT Clause:
   - Only select columns that are mentioned in the user's question.
   - Do not include unnecessary columns or values.
2. Aggregation (MAX/MIN):
   - Always perform JOINs before applying MAX() or MIN().
3. ORDER BY with Distinct Values:
   - Use a GROUP BY <column> before an ORDER BY <column> ASC|DESC to ensure distinct values.
4. Handling NULLs:
   - If a column may contain NULL values (indicated by "None" in value examples or explicitly mentioned), include a JOIN or a WHERE <column> IS NOT NULL clause.
5. FROM/JOIN Clauses:
   - Only include the tables essential for answering the question.
6. Strictly Follow Hints:
   - Adhere to all hints provided with the question.
7. Thorough Question Analysis:
   - Ensure all conditions and requirements mentioned in the question are addressed.
8. DISTINCT Keyword:
   - Use SELECT DISTINCT when the question requires unique values (e.g., IDs, URLs) or when column statistics (Value Statics) indicate its necessity.
9. Column Selection:
   - Carefully analyze column descriptions and hints to choose the correct column when similar columns exist across tables.
10. String Concatenation:
   - Do not use any string concatenation methods (e.g., || ' ' ||) in the SELECT clause.
11. JOIN Preference:
   - Prefer using INNER JOIN over nested SELECT statements.
12. Date Processing:
   - Use STRFTIME() for any date manipulations (e.g., STRFTIME('%Y', SOMETIME) to extract the year).

You are provided with the following inputs:
- Question: {QUESTION}
- Hint: {HINT}
- Gold Query: {GOLD_QUERY}
- Predicted Query: {PREDICTED_QUERY}

Based on the above, return a single numeric score between 0.0 and 2.0 that reflects how correct the predicted query is compared to the gold query. Respond with only the score and no additional explanation.
"""

ADMIN_INSTRUCTIONS = """\
1. SELECT Clause:
   - Only select columns mentioned in the user's question.
   - Avoid unnecessary columns or values.
2. Aggregation (MAX/MIN):
   - Always perform JOINs before using MAX() or MIN().
3. ORDER BY with Distinct Values:
   - Use GROUP BY <column> before ORDER BY <column> ASC|DESC to ensure distinct values.
4. Handling NULLs:
   - If a column may contain NULL values (indicated by "None" or explicitly mentioned), include a JOIN or WHERE <column> IS NOT NULL.
5. FROM/JOIN Clauses:
   - Include only essential tables for answering the question.
6. Strictly Follow Hints:
   - Adhere to all provided hints.
7. Thorough Question Analysis:
   - Address all conditions mentioned in the question.
8. DISTINCT Keyword:
   - Use SELECT DISTINCT when unique values (e.g., IDs, URLs) are needed.
9. Column Selection:
   - Analyze column descriptions and hints carefully to choose correctly when similar columns exist.
10. String Concatenation:
   - Never use || ' ' || or other concatenation in SELECT.
11. JOIN Preference:
   - Prioritize INNER JOIN over nested SELECT statements.
12. Date Processing:
   - Use STRFTIME() for date manipulations (e.g., STRFTIME('%Y', SOMETIME)).
"""

GENERATION_TEMPLATE = """\
Instructions:
You are an experienced database expert. Now you need to generate a SQL query given the database information, a question and some additional information. The database structure is defined by the following table schemas (comments after '--' provide additional column descriptions).

Note that the "Example Values" are actual values from the column. Some columns might contain the values that are directly related to the question. Use this information to justify which columns to use.

Given the table schema information description and the `Question`, you will be given table creation statements and you need to understand the database and columns to generate a single SQLite query that can answer the user's question.

Database admin instructions:
{ADMIN_INSTRUCTIONS}
------------------------------------------------------------
[Table creation statements]
{DATABASE_SCHEMA}
------------------------------------------------------------
Now is the real question, following the instruction and examples, generate the SQL query.
------------------------------------------------------------
Question:
{QUESTION} Hint: {HINT}
------------------------------------------------------------
Respond in the following format:

<reasoning>
Your detailed and step-by-step thinking path toward finding the correct SQL query
</reasoning>
<answer>
```sql
Your predicted SQL query
```
</answer>

Now is your turn to respond in the above format.
"""

_SLOT = re.compile(r"\{([A-Z_]+)\}")


def fill(template: str, values: Mapping[str, str]) -> str:
    missing = set(_SLOT.findall(template)) - set(values)
    if missing:
        raise KeyError(f"unfilled template slots: {sorted(missing)}")
    return _SLOT.sub(lambda m: values[m.group(1)], template)
