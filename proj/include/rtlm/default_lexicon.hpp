#pragma once

// Generated from data/lexicon.txt by tools/embed_lexicon.py. Do not edit.

#include <string_view>

namespace rtlm::textfeat {

inline constexpr std::string_view kDefaultLexiconText = R"lex(# Uncertainty lexicon, v1.
# All entries are normalized through the same lemmatizer as the input text,
# so inflected forms may be listed.

vague:
stuff
thing
something
anything
everything
whatever
somehow
somewhere
maybe
perhaps
probably
possibly
sort
various
several
bunch
lot
generally
usually
sometimes
roughly
approximately
somewhat
fairly
etc
history
art
life
world
culture
society
science
nature
universe
general
topic
idea
concept
philosophy
religion
politics
economy
technology

polysemy:
# lemma<TAB>sense count
bat	2
trunk	3
monitor	2
bank	2
bark	2
pitch	3
spring	3
light	3
match	2
rock	2
ring	2
bow	2
lead	2
date	2
mouse	2
club	2
seal	2
crane	2
wave	2
current	2
file	2
fan	2
jam	3
bolt	2
cell	3
mine	2
palm	2
scale	3
tie	2
watch	2
letter	2
novel	2
organ	2
plant	2
pound	2
star	2
table	2
bill	3
tire	2
park	2

pos:
# lemma<TAB>TAG[,TAG...]
the	DET
a	DET
an	DET
this	DET
that	PRON
my	DET
your	DET
his	DET
her	PRON
their	DET
our	DET
i	PRON
me	PRON
you	PRON
he	PRON
she	PRON
it	PRON
we	PRON
they	PRON
them	PRON
what	PRON
who	PRON
is	VERB
are	VERB
was	VERB
were	VERB
be	VERB
do	VERB
did	VERB
have	VERB
can	VERB
will	VERB
would	VERB
should	VERB
tell	VERB
saw	VERB,NOUN
see	VERB
like	VERB,ADP
love	VERB,NOUN
fly	NOUN,VERB
time	NOUN,VERB
deal	NOUN,VERB
run	VERB,NOUN
walk	VERB,NOUN
play	VERB,NOUN
book	NOUN,VERB
watch	VERB,NOUN
point	NOUN,VERB
show	VERB,NOUN
plant	NOUN,VERB
fish	NOUN,VERB
need	VERB,NOUN
help	VERB,NOUN
work	VERB,NOUN
cook	VERB,NOUN
visit	VERB,NOUN
talk	VERB,NOUN
differ	VERB
go	VERB
went	VERB
eat	VERB
explain	VERB
describe	VERB
think	VERB
know	VERB
find	VERB
make	VERB
want	VERB
read	VERB
bought	VERB
met	VERB
heard	VERB
fast	ADJ,ADV,NOUN,VERB
well	ADV,ADJ,NOUN
last	ADJ,VERB
best	ADJ,ADV
good	ADJ
new	ADJ
old	ADJ
big	ADJ
small	ADJ
social	ADJ
red	ADJ
blue	ADJ
rice	NOUN
sand	NOUN
john	NOUN
mary	NOUN
boy	NOUN
girl	NOUN
man	NOUN
woman	NOUN
dog	NOUN
cat	NOUN
bird	NOUN
telescope	NOUN
camera	NOUN
garden	NOUN
river	NOUN
city	NOUN
house	NOUN
car	NOUN
store	NOUN
hill	NOUN
friend	NOUN
teacher	NOUN
student	NOUN
doctor	NOUN
child	NOUN
bat	NOUN
trunk	NOUN
monitor	NOUN,VERB
bank	NOUN,VERB
bark	NOUN,VERB
park	NOUN,VERB
match	NOUN,VERB
ring	NOUN,VERB
date	NOUN,VERB
mouse	NOUN
star	NOUN,VERB
table	NOUN
way	NOUN
food	NOUN
pasta	NOUN
poverty	NOUN
country	NOUN
behavior	NOUN
diet	NOUN
interaction	NOUN
history	NOUN
art	NOUN
weather	NOUN
morning	NOUN
day	NOUN
week	NOUN
today	NOUN,ADV
tomorrow	NOUN,ADV
name	NOUN,VERB
cause	NOUN,VERB
consequence	NOUN
effect	NOUN
music	NOUN
movie	NOUN
game	NOUN
coffee	NOUN
tea	NOUN
hat	NOUN
coat	NOUN
picture	NOUN
window	NOUN
in	ADP
on	ADP
with	ADP
at	ADP
by	ADP
from	ADP
near	ADP
under	ADP
over	ADP
about	ADP
into	ADP
of	ADP
to	PART
and	CONJ
or	CONJ
but	CONJ

wh:
# Sentence-initial opener phrases. Lines starting with "..." are tail
# patterns: a question whose last word is one of these broad-scope nouns.
why
how
explain
describe
discuss
what are the causes
what are the consequences
what are the effects
what are the impacts
what are the benefits
what are the pros and cons
what do you think
what is the meaning
what is the role
what would happen
what if
in what ways
... country
... society
... world
... humanity
... future
... life
... people
... generation

coord:
and
or
nor
but
plus

prep:
in
on
with
at
by
from
near
under
over
about
into
)lex";

}  // namespace rtlm::textfeat
